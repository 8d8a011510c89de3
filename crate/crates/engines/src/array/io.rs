//! Array file format: a JSON header line naming the array and its
//! dimensions, then one line of comma-separated row-major values.
//!
//! ```text
//! {"name":"B","dims":[{"name":"d0","length":2},{"name":"d1","length":2}]}
//! 1.0,2.0,3.0,4.0
//! ```

use serde::{Deserialize, Serialize};

use super::{ArrayError, DenseArray, Dim};

#[derive(Serialize, Deserialize)]
struct Header {
    name: String,
    dims: Vec<HeaderDim>,
}

#[derive(Serialize, Deserialize)]
struct HeaderDim {
    name: String,
    length: usize,
}

pub fn parse_array_file(text: &str) -> Result<DenseArray, ArrayError> {
    let mut lines = text.lines();
    let header_line = lines.next().ok_or(ArrayError::FileFormat {
        line: 1,
        message: "missing JSON header line".into(),
    })?;
    let header: Header = serde_json::from_str(header_line).map_err(|e| ArrayError::FileFormat {
        line: 1,
        message: format!("bad JSON header: {e}"),
    })?;
    let values_line = lines.next().ok_or(ArrayError::FileFormat {
        line: 2,
        message: "missing values line".into(),
    })?;
    let mut values = Vec::new();
    for (i, field) in values_line.split(',').enumerate() {
        let v: f64 = field.trim().parse().map_err(|_| ArrayError::FileFormat {
            line: 2,
            message: format!("value {} (`{}`) is not a float", i + 1, field.trim()),
        })?;
        values.push(v);
    }
    let dims = header
        .dims
        .into_iter()
        .map(|d| Dim {
            name: d.name,
            len: d.length,
        })
        .collect();
    DenseArray::new(header.name, dims, values)
}

pub fn format_array_file(array: &DenseArray) -> String {
    let header = Header {
        name: array.name.clone(),
        dims: array
            .dims
            .iter()
            .map(|d| HeaderDim {
                name: d.name.clone(),
                length: d.len,
            })
            .collect(),
    };
    let values: Vec<String> = array.values.iter().map(|v| format!("{v}")).collect();
    format!(
        "{}\n{}\n",
        serde_json::to_string(&header).unwrap(),
        values.join(",")
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        let a = DenseArray::matrix("B", 2, 2, vec![1.0, -2.5, 3.25, 4.0]).unwrap();
        let text = format_array_file(&a);
        assert_eq!(parse_array_file(&text).unwrap(), a);
    }

    #[test]
    fn shape_mismatch_in_file_rejected() {
        let text = "{\"name\":\"B\",\"dims\":[{\"name\":\"d0\",\"length\":3}]}\n1.0,2.0\n";
        assert!(matches!(
            parse_array_file(text).unwrap_err(),
            ArrayError::Shape(_)
        ));
    }

    #[test]
    fn bad_value_names_position() {
        let text = "{\"name\":\"B\",\"dims\":[{\"name\":\"d0\",\"length\":2}]}\n1.0,zap\n";
        let err = parse_array_file(text).unwrap_err();
        assert!(matches!(err, ArrayError::FileFormat { line: 2, .. }));
    }
}
