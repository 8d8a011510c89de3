//! Statement execution: scan → hash join → filter → project/aggregate.
//!
//! All statements, including bare `COUNT(*)`, stream rows through the
//! same scan pipeline; there is no row-count shortcut. `DISTINCT`,
//! joins and grouping use hash structures (non-cryptographic hashing,
//! type-specialized single-column dedup) — the hash paths are this
//! engine's designed strength.

use std::sync::Arc;

use rustc_hash::{FxHashMap, FxHashSet};

use super::ast::*;
use super::{RelOutput, Relation, RelationalEngine, RelationalError, Schema};
use crate::value::{Value, ValueType};

pub fn execute(
    engine: &RelationalEngine,
    stmt: &SelectStatement,
) -> Result<RelOutput, RelationalError> {
    let bindings = bind_tables(engine, stmt)?;
    let layout = Layout::new(&bindings);
    let predicates = stmt
        .predicates
        .iter()
        .map(|p| compile_predicate(p, &layout))
        .collect::<Result<Vec<_>, _>>()?;

    if stmt.is_bare_count() {
        let mut n: i64 = 0;
        scan_rows(stmt, &bindings, &layout, &predicates, |_| {
            n += 1;
            Ok(())
        })?;
        return Ok(RelOutput::Scalar(n));
    }

    let mut result = if !stmt.group_by.is_empty() {
        aggregate(stmt, &bindings, &predicates, &layout)?
    } else {
        project(stmt, &bindings, &predicates, &layout)?
    };

    if let Some(limit) = stmt.limit {
        result.rows.truncate(limit);
    }
    Ok(RelOutput::Table(result))
}

struct Binding {
    name: String,
    relation: Arc<Relation>,
}

fn bind_tables(
    engine: &RelationalEngine,
    stmt: &SelectStatement,
) -> Result<Vec<Binding>, RelationalError> {
    let mut bindings = vec![Binding {
        name: stmt.from.binding().to_string(),
        relation: engine.table(&stmt.from.table)?,
    }];
    if let Some(join) = &stmt.join {
        bindings.push(Binding {
            name: join.table.binding().to_string(),
            relation: engine.table(&join.table.table)?,
        });
    }
    Ok(bindings)
}

/// Flattened view over the bound tables: global column indices plus
/// lookup by (qualifier, name).
struct Layout {
    // (binding name, column name, type)
    columns: Vec<(String, String, ValueType)>,
}

impl Layout {
    fn new(bindings: &[Binding]) -> Layout {
        let mut columns = Vec::new();
        for b in bindings {
            for (name, ty) in &b.relation.schema.0 {
                columns.push((b.name.clone(), name.clone(), *ty));
            }
        }
        Layout { columns }
    }

    fn resolve(&self, col: &ColumnRef) -> Result<usize, RelationalError> {
        let mut found = None;
        for (i, (binding, name, _)) in self.columns.iter().enumerate() {
            if name != &col.column {
                continue;
            }
            if let Some(q) = &col.qualifier {
                if q != binding {
                    continue;
                }
            }
            if found.is_some() {
                return Err(RelationalError::AmbiguousColumn(col.display()));
            }
            found = Some(i);
        }
        found.ok_or_else(|| RelationalError::UnknownColumn(col.display()))
    }

    fn column_type(&self, index: usize) -> ValueType {
        self.columns[index].2
    }
}

/// Streams the (joined) filtered rows into `visit` without
/// materializing the join: combined rows live in one reused buffer. The
/// join is a hash join, built on the right input and probed with the
/// left.
fn scan_rows(
    stmt: &SelectStatement,
    bindings: &[Binding],
    layout: &Layout,
    predicates: &[CompiledPredicate],
    mut visit: impl FnMut(&[Value]) -> Result<(), RelationalError>,
) -> Result<(), RelationalError> {
    let left = &bindings[0].relation;
    let Some(join) = &stmt.join else {
        for row in &left.rows {
            if passes(predicates, row)? {
                visit(row)?;
            }
        }
        return Ok(());
    };
    let right = &bindings[1].relation;
    let left_arity = left.schema.arity();
    let lk = layout.resolve(&join.left)?;
    let rk = layout.resolve(&join.right)?;
    // normalize so `probe_key` indexes the left input and `build_key`
    // the right; exactly one side of the condition must come from each
    let (probe_key, build_key) = match (lk < left_arity, rk < left_arity) {
        (true, false) => (lk, rk - left_arity),
        (false, true) => (rk, lk - left_arity),
        _ => {
            return Err(RelationalError::TypeError(
                "join condition must reference both tables".into(),
            ))
        }
    };

    let mut built: FxHashMap<&Value, Vec<&[Value]>> = FxHashMap::default();
    for row in &right.rows {
        built.entry(&row[build_key]).or_default().push(row);
    }

    let mut combined: Vec<Value> = Vec::new();
    for lrow in &left.rows {
        if let Some(matches) = built.get(&lrow[probe_key]) {
            for rrow in matches {
                combined.clear();
                combined.extend(lrow.iter().cloned());
                combined.extend(rrow.iter().cloned());
                if passes(predicates, &combined)? {
                    visit(&combined)?;
                }
            }
        }
    }
    Ok(())
}

struct CompiledPredicate {
    left: CompiledOperand,
    op: CmpOp,
    right: CompiledOperand,
}

enum CompiledOperand {
    Column(usize),
    Literal(Value),
}

fn compile_predicate(
    pred: &Predicate,
    layout: &Layout,
) -> Result<CompiledPredicate, RelationalError> {
    let compile = |op: &Operand| -> Result<CompiledOperand, RelationalError> {
        Ok(match op {
            Operand::Column(c) => CompiledOperand::Column(layout.resolve(c)?),
            Operand::Literal(v) => CompiledOperand::Literal(v.clone()),
        })
    };
    Ok(CompiledPredicate {
        left: compile(&pred.left)?,
        op: pred.op,
        right: compile(&pred.right)?,
    })
}

impl CompiledPredicate {
    fn eval(&self, row: &[Value]) -> Result<bool, RelationalError> {
        let left = self.left.value(row);
        let right = self.right.value(row);
        let ord = left.compare_weak(right).ok_or_else(|| {
            RelationalError::TypeError(format!(
                "cannot compare {} with {}",
                left.value_type(),
                right.value_type()
            ))
        })?;
        Ok(self.op.holds(ord))
    }
}

impl CompiledOperand {
    fn value<'a>(&'a self, row: &'a [Value]) -> &'a Value {
        match self {
            CompiledOperand::Column(i) => &row[*i],
            CompiledOperand::Literal(v) => v,
        }
    }
}

fn passes(predicates: &[CompiledPredicate], row: &[Value]) -> Result<bool, RelationalError> {
    for p in predicates {
        if !p.eval(row)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Plain projection, `SELECT *` and hash-based `DISTINCT`.
fn project(
    stmt: &SelectStatement,
    bindings: &[Binding],
    predicates: &[CompiledPredicate],
    layout: &Layout,
) -> Result<Relation, RelationalError> {
    let (indices, distinct) = match &stmt.projection {
        Projection::Star => ((0..layout.columns.len()).collect::<Vec<_>>(), false),
        Projection::Items { distinct, items } => {
            let mut indices = Vec::with_capacity(items.len());
            for item in items {
                match item {
                    SelectItem::Column(c) => indices.push(layout.resolve(c)?),
                    SelectItem::CountStar | SelectItem::Sum(_) => {
                        return Err(RelationalError::Unsupported(
                            "aggregates require GROUP BY or a bare COUNT(*)".into(),
                        ))
                    }
                }
            }
            (indices, *distinct)
        }
    };

    let mut schema_cols = Vec::with_capacity(indices.len());
    for &i in &indices {
        let (binding, name, ty) = &layout.columns[i];
        schema_cols.push((unique_name(&schema_cols, name, binding), *ty));
    }
    let schema = Schema(schema_cols);

    let mut out_rows = Vec::new();
    if !distinct {
        scan_rows(stmt, bindings, layout, predicates, |row| {
            out_rows.push(indices.iter().map(|&i| row[i].clone()).collect());
            Ok(())
        })?;
    } else if let [single] = indices.as_slice() {
        // single-column dedup specializes on the column type:
        // numeric columns dedup on raw bits
        match layout.column_type(*single) {
            ValueType::Int64 | ValueType::Float64 => {
                // raw f64 bit patterns are sparse and cluster under
                // multiplicative hashing; finalize with a mix first
                let mix = |k: u64| (k ^ (k >> 33)).wrapping_mul(0xff51afd7ed558ccd);
                let mut seen: FxHashSet<u64> = FxHashSet::default();
                scan_rows(stmt, bindings, layout, predicates, |row| {
                    let key = match &row[*single] {
                        Value::Int(i) => *i as u64,
                        // fold -0.0 into +0.0
                        Value::Float(f) if *f == 0.0 => 0,
                        Value::Float(f) => f.to_bits(),
                        Value::Text(_) => unreachable!("typed column"),
                    };
                    if seen.insert(mix(key)) {
                        out_rows.push(vec![row[*single].clone()]);
                    }
                    Ok(())
                })?;
            }
            ValueType::Text => {
                let mut seen: FxHashSet<String> = FxHashSet::default();
                scan_rows(stmt, bindings, layout, predicates, |row| {
                    let Value::Text(text) = &row[*single] else { unreachable!("typed column") };
                    if !seen.contains(text.as_str()) {
                        seen.insert(text.clone());
                        out_rows.push(vec![row[*single].clone()]);
                    }
                    Ok(())
                })?;
            }
        }
    } else {
        // general projection dedup: gather into a reused scratch row and
        // allocate only for first-seen rows
        let mut seen: FxHashSet<Vec<Value>> = FxHashSet::default();
        let mut scratch: Vec<Value> = Vec::with_capacity(indices.len());
        scan_rows(stmt, bindings, layout, predicates, |row| {
            scratch.clear();
            scratch.extend(indices.iter().map(|&i| row[i].clone()));
            if !seen.contains(scratch.as_slice()) {
                seen.insert(scratch.clone());
                out_rows.push(scratch.clone());
            }
            Ok(())
        })?;
    }

    Ok(Relation {
        name: String::new(),
        schema,
        rows: out_rows,
    })
}

enum AggState {
    Count(i64),
    SumInt(i64),
    SumFloat(f64),
}

/// Hash aggregation for GROUP BY, streamed straight off the scan so
/// join output is never materialized. Select items must be group keys
/// or aggregates; output rows follow first-seen group order.
fn aggregate(
    stmt: &SelectStatement,
    bindings: &[Binding],
    predicates: &[CompiledPredicate],
    layout: &Layout,
) -> Result<Relation, RelationalError> {
    let items = match &stmt.projection {
        Projection::Items { distinct: false, items } => items,
        Projection::Star => {
            return Err(RelationalError::Unsupported(
                "SELECT * cannot be combined with GROUP BY".into(),
            ))
        }
        Projection::Items { distinct: true, .. } => {
            return Err(RelationalError::Unsupported(
                "DISTINCT cannot be combined with GROUP BY".into(),
            ))
        }
    };

    let key_indices = stmt
        .group_by
        .iter()
        .map(|c| layout.resolve(c))
        .collect::<Result<Vec<_>, _>>()?;

    enum OutItem {
        Key(usize), // position in the group key
        Agg(usize), // position in the aggregate list
    }

    struct AggSpec {
        left: usize,
        right: Option<usize>,
        kind: AggKind,
    }
    #[derive(Clone, Copy, PartialEq)]
    enum AggKind {
        Count,
        SumInt,
        SumFloat,
    }

    let mut out_items = Vec::new();
    let mut aggs: Vec<AggSpec> = Vec::new();
    let mut schema_cols: Vec<(String, ValueType)> = Vec::new();
    for item in items {
        match item {
            SelectItem::Column(c) => {
                let idx = layout.resolve(c)?;
                let key_pos = key_indices.iter().position(|&k| k == idx).ok_or_else(|| {
                    RelationalError::Unsupported(format!(
                        "column `{}` must appear in GROUP BY",
                        c.display()
                    ))
                })?;
                out_items.push(OutItem::Key(key_pos));
                schema_cols.push((
                    unique_name(&schema_cols, &c.column, &layout.columns[idx].0),
                    layout.column_type(idx),
                ));
            }
            SelectItem::CountStar => {
                out_items.push(OutItem::Agg(aggs.len()));
                aggs.push(AggSpec {
                    left: 0,
                    right: None,
                    kind: AggKind::Count,
                });
                schema_cols.push((unique_name(&schema_cols, "count", ""), ValueType::Int64));
            }
            SelectItem::Sum(sum) => {
                let left = layout.resolve(&sum.left)?;
                let right = sum.right.as_ref().map(|c| layout.resolve(c)).transpose()?;
                for idx in std::iter::once(left).chain(right) {
                    if layout.column_type(idx) == ValueType::Text {
                        return Err(RelationalError::TypeError(format!(
                            "SUM argument `{}` must be numeric",
                            layout.columns[idx].1
                        )));
                    }
                }
                // SUM over a single int column stays integral; anything
                // involving floats or a product is float64
                let kind = if right.is_none() && layout.column_type(left) == ValueType::Int64 {
                    AggKind::SumInt
                } else {
                    AggKind::SumFloat
                };
                let base = match &sum.right {
                    None => format!("sum_{}", sum.left.column),
                    Some(r) => format!("sum_{}_{}", sum.left.column, r.column),
                };
                out_items.push(OutItem::Agg(aggs.len()));
                schema_cols.push((
                    unique_name(&schema_cols, &base, ""),
                    if kind == AggKind::SumInt {
                        ValueType::Int64
                    } else {
                        ValueType::Float64
                    },
                ));
                aggs.push(AggSpec { left, right, kind });
            }
        }
    }

    let mut groups: FxHashMap<Vec<Value>, usize> = FxHashMap::default();
    let mut states: Vec<(Vec<Value>, Vec<AggState>)> = Vec::new();
    let mut key_scratch: Vec<Value> = Vec::with_capacity(key_indices.len());

    scan_rows(stmt, bindings, layout, predicates, |row| {
        key_scratch.clear();
        key_scratch.extend(key_indices.iter().map(|&i| row[i].clone()));
        let slot = match groups.get(key_scratch.as_slice()) {
            Some(&slot) => slot,
            None => {
                let fresh: Vec<AggState> = aggs
                    .iter()
                    .map(|spec| match spec.kind {
                        AggKind::Count => AggState::Count(0),
                        AggKind::SumInt => AggState::SumInt(0),
                        AggKind::SumFloat => AggState::SumFloat(0.0),
                    })
                    .collect();
                states.push((key_scratch.clone(), fresh));
                groups.insert(key_scratch.clone(), states.len() - 1);
                states.len() - 1
            }
        };
        for (spec, state) in aggs.iter().zip(states[slot].1.iter_mut()) {
            match state {
                AggState::Count(n) => *n += 1,
                AggState::SumInt(acc) => {
                    if let Value::Int(v) = &row[spec.left] {
                        *acc += v;
                    }
                }
                AggState::SumFloat(acc) => {
                    let l = row[spec.left].as_f64().unwrap_or(f64::NAN);
                    let term = match spec.right {
                        Some(r) => l * row[r].as_f64().unwrap_or(f64::NAN),
                        None => l,
                    };
                    *acc += term;
                }
            }
        }
        Ok(())
    })?;

    let mut out_rows = Vec::with_capacity(states.len());
    for (key, agg_states) in states {
        let mut row = Vec::with_capacity(out_items.len());
        for item in &out_items {
            match item {
                OutItem::Key(k) => row.push(key[*k].clone()),
                OutItem::Agg(a) => row.push(match &agg_states[*a] {
                    AggState::Count(n) => Value::Int(*n),
                    AggState::SumInt(n) => Value::Int(*n),
                    AggState::SumFloat(f) => Value::Float(*f),
                }),
            }
        }
        out_rows.push(row);
    }

    Ok(Relation {
        name: String::new(),
        schema: Schema(schema_cols),
        rows: out_rows,
    })
}

/// Result schemas must keep column names unique; qualify or suffix on a
/// clash.
fn unique_name(existing: &[(String, ValueType)], base: &str, qualifier: &str) -> String {
    let taken = |n: &str| existing.iter().any(|(e, _)| e == n);
    if !taken(base) {
        return base.to_string();
    }
    if !qualifier.is_empty() {
        let qualified = format!("{qualifier}_{base}");
        if !taken(&qualified) {
            return qualified;
        }
    }
    let mut i = 2;
    loop {
        let candidate = format!("{base}_{i}");
        if !taken(&candidate) {
            return candidate;
        }
        i += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;

    fn engine_with_t() -> RelationalEngine {
        let eng = RelationalEngine::new();
        eng.load_csv(
            "T",
            "a:int64,b:int64\n\
             3,1\n\
             7,2\n\
             9,4\n",
        )
        .unwrap();
        eng
    }

    #[test]
    fn bare_count_is_scalar() {
        let eng = engine_with_t();
        assert_eq!(eng.execute("SELECT COUNT(*) FROM T").unwrap(), RelOutput::Scalar(3));
    }

    #[test]
    fn distinct_is_set_semantics() {
        let eng = RelationalEngine::new();
        eng.load_csv("T", "x:int64\n1\n1\n2\n").unwrap();
        let out = eng.execute("SELECT DISTINCT x FROM T").unwrap();
        let RelOutput::Table(rel) = out else { panic!() };
        let mut vals: Vec<i64> = rel
            .rows
            .iter()
            .map(|r| match r[0] {
                Value::Int(i) => i,
                _ => panic!(),
            })
            .collect();
        vals.sort();
        assert_eq!(vals, vec![1, 2]);
    }

    #[test]
    fn distinct_multi_column_and_text() {
        let eng = RelationalEngine::new();
        eng.load_csv("T", "x:int64,t:text\n1,'a'\n1,'a'\n1,'b'\n2,'a'\n").unwrap();
        let out = eng.execute("SELECT DISTINCT x, t FROM T").unwrap();
        let RelOutput::Table(rel) = out else { panic!() };
        assert_eq!(rel.rows.len(), 3);
        let out = eng.execute("SELECT DISTINCT t FROM T").unwrap();
        let RelOutput::Table(rel) = out else { panic!() };
        assert_eq!(rel.rows.len(), 2);
    }

    // Oracle for the WHERE example: replay the predicate row by row.
    #[test]
    fn where_gt_matches_row_by_row_oracle() {
        let eng = engine_with_t();
        let out = eng.execute("SELECT a, b FROM T WHERE a > 5").unwrap();
        let RelOutput::Table(rel) = out else { panic!() };

        let raw = [(3i64, 1i64), (7, 2), (9, 4)];
        let expected: Vec<Vec<Value>> = raw
            .iter()
            .filter(|(a, _)| *a > 5)
            .map(|(a, b)| vec![Value::Int(*a), Value::Int(*b)])
            .collect();
        assert_eq!(rel.rows, expected);
    }

    #[test]
    fn join_and_group_compute_matmul_cell() {
        let eng = RelationalEngine::new();
        // 1x2 times 2x1 as cell tables
        eng.load_csv("A_cells", "d0:int64,d1:int64,val:float64\n0,0,2.0\n0,1,3.0\n")
            .unwrap();
        eng.load_csv("B_cells", "d0:int64,d1:int64,val:float64\n0,0,10.0\n1,0,100.0\n")
            .unwrap();
        let out = eng
            .execute(
                "SELECT a.d0, b.d1, SUM(a.val * b.val) FROM A_cells a JOIN B_cells b \
                 ON a.d1 = b.d0 GROUP BY a.d0, b.d1",
            )
            .unwrap();
        let RelOutput::Table(rel) = out else { panic!() };
        assert_eq!(rel.rows.len(), 1);
        assert_eq!(rel.rows[0][2], Value::Float(2.0 * 10.0 + 3.0 * 100.0));
    }

    #[test]
    fn unknown_column_named_in_error() {
        let eng = engine_with_t();
        assert_eq!(
            eng.execute("SELECT nope FROM T").unwrap_err(),
            RelationalError::UnknownColumn("nope".into())
        );
    }

    #[test]
    fn one_sided_join_condition_rejected() {
        let eng = RelationalEngine::new();
        eng.load_csv("L", "x:int64\n1\n").unwrap();
        eng.load_csv("R", "y:int64,z:int64\n1,1\n").unwrap();
        let err = eng
            .execute("SELECT * FROM L JOIN R ON y = z")
            .unwrap_err();
        assert!(matches!(err, RelationalError::TypeError(_)));
    }

    #[test]
    fn group_count_per_group() {
        let eng = RelationalEngine::new();
        eng.load_csv("G", "k:int64,v:float64\n1,0.5\n1,1.5\n2,4.0\n").unwrap();
        let out = eng
            .execute("SELECT k, COUNT(*), SUM(v) FROM G GROUP BY k")
            .unwrap();
        let RelOutput::Table(mut rel) = out else { panic!() };
        rel.rows.sort();
        assert_eq!(
            rel.rows,
            vec![
                vec![Value::Int(1), Value::Int(2), Value::Float(2.0)],
                vec![Value::Int(2), Value::Int(1), Value::Float(4.0)],
            ]
        );
    }
}
