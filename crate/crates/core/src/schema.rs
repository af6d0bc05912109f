//! Relational schemas as heterogeneous graphs.
//!
//! A [`SchemaGraph`] holds table nodes, typed column nodes (ordinal order
//! preserved) and two edge kinds: table-owns-column and foreign-key
//! (child column to parent primary-key column). The module parses a DDL
//! subset into that graph, emits a canonical DDL form back out, fits
//! statistics over a schema collection, samples novel schemas, and
//! populates any acyclic schema with referentially consistent rows.
//!
//! Accepted DDL subset: `CREATE TABLE name ( ... );` with column
//! definitions (`name TYPE [NOT NULL] [PRIMARY KEY]`), table-level
//! `PRIMARY KEY (a, b)` and `FOREIGN KEY (c) REFERENCES parent (p)`
//! clauses. Keywords are case-insensitive; backquoted identifiers are
//! unquoted; `--` comments are ignored. Recognized type spellings map
//! onto five canonical types: INT (INTEGER, BIGINT, SMALLINT), FLOAT
//! (REAL, DOUBLE, DECIMAL, NUMERIC), VARCHAR(n) (CHAR), DATE (DATETIME,
//! TIMESTAMP) and BOOL (BOOLEAN). Lenient parsing skips unrecognized
//! statements and table items with a warning; strict parsing errors with
//! the line number.
//!
//! Canonical emission orders tables parents-first (ties alphabetical;
//! foreign-key cycles fall back to alphabetical order behind a warning
//! comment), keeps column ordinals, and always spells constraints as
//! table-level clauses, so `emit(parse(emit(g))) == emit(g)` byte for
//! byte.

use std::collections::{BTreeSet, HashMap, HashSet};

use chrono::NaiveDate;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chargen::CharModel;
use crate::dist::Empirical;
use crate::rng::seeded;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("duplicate table {0:?}")]
    DuplicateTable(String),
    #[error("duplicate column {column:?} in table {table:?}")]
    DuplicateColumn { table: String, column: String },
    #[error("foreign key references missing table {0:?}")]
    MissingFkTable(String),
    #[error("foreign key references missing column {table:?}.{column:?}")]
    MissingFkColumn { table: String, column: String },
    #[error("foreign key {child}.{column}: parent column {parent}.{parent_column} is not a primary key")]
    FkParentNotPk { child: String, column: String, parent: String, parent_column: String },
    #[error("foreign key type mismatch: {child}.{column} is {child_type}, {parent}.{parent_column} is {parent_type}")]
    FkTypeMismatch {
        child: String,
        column: String,
        child_type: String,
        parent: String,
        parent_column: String,
        parent_type: String,
    },
    #[error("schema has a foreign-key cycle; cannot populate")]
    CyclicSchema,
    #[error("primary key column {table:?}.{column:?} has non-INT type; population supports INT keys")]
    UnsupportedPkType { table: String, column: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Column datatypes (the VARCHAR length is part of the type).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DataType {
    Int,
    Float,
    Varchar(u32),
    Date,
    Bool,
}

impl std::fmt::Display for DataType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DataType::Int => write!(f, "INT"),
            DataType::Float => write!(f, "FLOAT"),
            DataType::Varchar(n) => write!(f, "VARCHAR({n})"),
            DataType::Date => write!(f, "DATE"),
            DataType::Bool => write!(f, "BOOL"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub datatype: DataType,
    pub nullable: bool,
    pub is_pk: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Foreign-key edge: child column references parent primary-key column.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ForeignKey {
    pub child_table: String,
    pub child_column: String,
    pub parent_table: String,
    pub parent_column: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchemaGraph {
    pub tables: Vec<Table>,
    pub foreign_keys: Vec<ForeignKey>,
}

impl SchemaGraph {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Check every structural invariant; parsing and sampling both end
    /// here before returning a graph.
    pub fn validate(&self) -> Result<(), SchemaError> {
        let mut names = HashSet::new();
        for t in &self.tables {
            if !names.insert(t.name.as_str()) {
                return Err(SchemaError::DuplicateTable(t.name.clone()));
            }
            let mut cols = HashSet::new();
            for c in &t.columns {
                if !cols.insert(c.name.as_str()) {
                    return Err(SchemaError::DuplicateColumn {
                        table: t.name.clone(),
                        column: c.name.clone(),
                    });
                }
            }
        }
        for fk in &self.foreign_keys {
            let child =
                self.table(&fk.child_table).ok_or_else(|| {
                    SchemaError::MissingFkTable(fk.child_table.clone())
                })?;
            let parent =
                self.table(&fk.parent_table).ok_or_else(|| {
                    SchemaError::MissingFkTable(fk.parent_table.clone())
                })?;
            let child_col = child.column(&fk.child_column).ok_or_else(|| {
                SchemaError::MissingFkColumn {
                    table: fk.child_table.clone(),
                    column: fk.child_column.clone(),
                }
            })?;
            let parent_col = parent.column(&fk.parent_column).ok_or_else(|| {
                SchemaError::MissingFkColumn {
                    table: fk.parent_table.clone(),
                    column: fk.parent_column.clone(),
                }
            })?;
            if !parent_col.is_pk {
                return Err(SchemaError::FkParentNotPk {
                    child: fk.child_table.clone(),
                    column: fk.child_column.clone(),
                    parent: fk.parent_table.clone(),
                    parent_column: fk.parent_column.clone(),
                });
            }
            if child_col.datatype != parent_col.datatype {
                return Err(SchemaError::FkTypeMismatch {
                    child: fk.child_table.clone(),
                    column: fk.child_column.clone(),
                    child_type: child_col.datatype.to_string(),
                    parent: fk.parent_table.clone(),
                    parent_column: fk.parent_column.clone(),
                    parent_type: parent_col.datatype.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Name-keyed normal form: tables sorted by name, foreign keys
    /// sorted. Two graphs are isomorphic (for this artifact's purposes)
    /// when their normal forms are equal.
    pub fn normalized(&self) -> SchemaGraph {
        let mut tables = self.tables.clone();
        tables.sort_by(|a, b| a.name.cmp(&b.name));
        let mut foreign_keys = self.foreign_keys.clone();
        foreign_keys.sort();
        SchemaGraph { tables, foreign_keys }
    }

    /// Tables in parents-before-children order (ties alphabetical), or
    /// `None` when the table-level FK graph has a cycle. Self-references
    /// are ignored for ordering.
    pub fn topo_order(&self) -> Option<Vec<usize>> {
        let idx: HashMap<&str, usize> =
            self.tables.iter().enumerate().map(|(i, t)| (t.name.as_str(), i)).collect();
        let mut parents: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.tables.len()];
        for fk in &self.foreign_keys {
            let c = idx[fk.child_table.as_str()];
            let p = idx[fk.parent_table.as_str()];
            if c != p {
                parents[c].insert(p);
            }
        }
        let mut order = Vec::new();
        let mut placed = vec![false; self.tables.len()];
        let mut by_name: Vec<usize> = (0..self.tables.len()).collect();
        by_name.sort_by(|&a, &b| self.tables[a].name.cmp(&self.tables[b].name));
        while order.len() < self.tables.len() {
            let next = by_name.iter().copied().find(|&i| {
                !placed[i] && parents[i].iter().all(|&p| placed[p])
            })?;
            placed[next] = true;
            order.push(next);
        }
        Some(order)
    }
}

/// Parser output: the graph plus lenient-mode warnings.
#[derive(Debug)]
pub struct ParsedDdl {
    pub graph: SchemaGraph,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(u64),
    LParen,
    RParen,
    Comma,
    Semi,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, SchemaError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                line += 1;
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '-' => {
                chars.next();
                if chars.peek() == Some(&'-') {
                    for c in chars.by_ref() {
                        if c == '\n' {
                            line += 1;
                            break;
                        }
                    }
                } else {
                    return Err(SchemaError::Parse(line, "stray '-'".into()));
                }
            }
            '(' => {
                out.push((Tok::LParen, line));
                chars.next();
            }
            ')' => {
                out.push((Tok::RParen, line));
                chars.next();
            }
            ',' => {
                out.push((Tok::Comma, line));
                chars.next();
            }
            ';' => {
                out.push((Tok::Semi, line));
                chars.next();
            }
            '`' | '"' => {
                let quote = c;
                chars.next();
                let mut ident = String::new();
                loop {
                    match chars.next() {
                        Some(c) if c == quote => break,
                        Some('\n') | None => {
                            return Err(SchemaError::Parse(line, "unterminated quoted identifier".into()))
                        }
                        Some(c) => ident.push(c),
                    }
                }
                out.push((Tok::Ident(ident), line));
            }
            c if c.is_ascii_digit() => {
                let mut n = 0u64;
                while let Some(&d) = chars.peek() {
                    if let Some(v) = d.to_digit(10) {
                        n = n * 10 + v as u64;
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push((Tok::Number(n), line));
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut ident = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        ident.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push((Tok::Ident(ident), line));
            }
            other => {
                return Err(SchemaError::Parse(line, format!("unexpected character {other:?}")));
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    strict: bool,
    warnings: Vec<String>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).or_else(|| self.toks.last()).map(|(_, l)| *l).unwrap_or(0)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn keyword(&self, t: &Tok) -> Option<String> {
        match t {
            Tok::Ident(s) => Some(s.to_ascii_uppercase()),
            _ => None,
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if let Some(t) = self.peek() {
            if self.keyword(t).as_deref() == Some(kw) {
                self.pos += 1;
                return true;
            }
        }
        false
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SchemaError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(SchemaError::Parse(self.line(), format!("expected {kw}")))
        }
    }

    fn expect_ident(&mut self) -> Result<String, SchemaError> {
        let line = self.line();
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            other => Err(SchemaError::Parse(line, format!("expected identifier, got {other:?}"))),
        }
    }

    fn expect_tok(&mut self, t: Tok) -> Result<(), SchemaError> {
        let line = self.line();
        match self.next() {
            Some(got) if got == t => Ok(()),
            other => Err(SchemaError::Parse(line, format!("expected {t:?}, got {other:?}"))),
        }
    }

    fn skip_statement(&mut self) {
        while let Some(t) = self.next() {
            if t == Tok::Semi {
                break;
            }
        }
    }

    /// Skip one parenthesized-body item up to the next top-level comma
    /// or the closing paren (which is left unconsumed).
    fn skip_item(&mut self) {
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            match t {
                Tok::LParen => {
                    depth += 1;
                    self.pos += 1;
                }
                Tok::RParen if depth == 0 => break,
                Tok::RParen => {
                    depth -= 1;
                    self.pos += 1;
                }
                Tok::Comma if depth == 0 => break,
                _ => self.pos += 1,
            }
        }
    }

    fn parse_datatype(&mut self) -> Result<DataType, SchemaError> {
        let line = self.line();
        let name = self.expect_ident()?.to_ascii_uppercase();
        let with_len = |p: &mut Parser, default: u32| -> Result<u32, SchemaError> {
            if p.peek() == Some(&Tok::LParen) {
                p.pos += 1;
                let line = p.line();
                let n = match p.next() {
                    Some(Tok::Number(n)) => n as u32,
                    other => {
                        return Err(SchemaError::Parse(line, format!("expected length, got {other:?}")))
                    }
                };
                // Precision scale (e.g. DECIMAL(10,2)) is tolerated and dropped.
                if p.peek() == Some(&Tok::Comma) {
                    p.pos += 1;
                    p.next();
                }
                p.expect_tok(Tok::RParen)?;
                Ok(n)
            } else {
                Ok(default)
            }
        };
        match name.as_str() {
            "INT" | "INTEGER" | "BIGINT" | "SMALLINT" => {
                with_len(self, 0)?;
                Ok(DataType::Int)
            }
            "FLOAT" | "REAL" | "DOUBLE" | "DECIMAL" | "NUMERIC" => {
                with_len(self, 0)?;
                Ok(DataType::Float)
            }
            "VARCHAR" | "CHAR" => Ok(DataType::Varchar(with_len(self, 255)?)),
            "DATE" | "DATETIME" | "TIMESTAMP" => Ok(DataType::Date),
            "BOOL" | "BOOLEAN" => Ok(DataType::Bool),
            other => Err(SchemaError::Parse(line, format!("unrecognized datatype {other}"))),
        }
    }

    fn parse_create_table(&mut self) -> Result<Table_and_fks, SchemaError> {
        self.expect_keyword("TABLE")?;
        // Tolerate IF NOT EXISTS.
        if self.eat_keyword("IF") {
            self.expect_keyword("NOT")?;
            self.expect_keyword("EXISTS")?;
        }
        let name = self.expect_ident()?;
        self.expect_tok(Tok::LParen)?;
        let mut columns: Vec<Column> = Vec::new();
        let mut pk_cols: Vec<String> = Vec::new();
        let mut fks: Vec<ForeignKey> = Vec::new();
        loop {
            let item_line = self.line();
            match self.peek().cloned() {
                Some(Tok::Ident(word)) if word.eq_ignore_ascii_case("PRIMARY") => {
                    self.pos += 1;
                    self.expect_keyword("KEY")?;
                    self.expect_tok(Tok::LParen)?;
                    loop {
                        pk_cols.push(self.expect_ident()?);
                        if self.peek() == Some(&Tok::Comma) {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                    self.expect_tok(Tok::RParen)?;
                }
                Some(Tok::Ident(word)) if word.eq_ignore_ascii_case("FOREIGN") => {
                    self.pos += 1;
                    self.expect_keyword("KEY")?;
                    self.expect_tok(Tok::LParen)?;
                    let child_column = self.expect_ident()?;
                    self.expect_tok(Tok::RParen)?;
                    self.expect_keyword("REFERENCES")?;
                    let parent_table = self.expect_ident()?;
                    self.expect_tok(Tok::LParen)?;
                    let parent_column = self.expect_ident()?;
                    self.expect_tok(Tok::RParen)?;
                    fks.push(ForeignKey {
                        child_table: name.clone(),
                        child_column,
                        parent_table,
                        parent_column,
                    });
                }
                Some(Tok::Ident(_)) => {
                    let col_name = self.expect_ident()?;
                    match self.parse_datatype() {
                        Ok(datatype) => {
                            let mut nullable = true;
                            let mut is_pk = false;
                            loop {
                                if self.eat_keyword("NOT") {
                                    self.expect_keyword("NULL")?;
                                    nullable = false;
                                } else if self.eat_keyword("NULL") {
                                    nullable = true;
                                } else if self.eat_keyword("PRIMARY") {
                                    self.expect_keyword("KEY")?;
                                    is_pk = true;
                                } else {
                                    break;
                                }
                            }
                            match self.peek() {
                                Some(Tok::Comma) | Some(Tok::RParen) => {}
                                _ if self.strict => {
                                    return Err(SchemaError::Parse(
                                        self.line(),
                                        "unexpected tokens after column definition".into(),
                                    ));
                                }
                                _ => {
                                    self.warnings.push(format!(
                                        "line {item_line}: extra tokens after column {col_name} skipped"
                                    ));
                                    self.skip_item();
                                }
                            }
                            columns.push(Column { name: col_name, datatype, nullable, is_pk });
                        }
                        Err(e) if self.strict => return Err(e),
                        Err(_) => {
                            self.warnings.push(format!(
                                "line {item_line}: unrecognized item {col_name:?} skipped"
                            ));
                            self.skip_item();
                        }
                    }
                }
                _ => {
                    if self.strict {
                        return Err(SchemaError::Parse(item_line, "expected table item".into()));
                    }
                    self.warnings.push(format!("line {item_line}: unrecognized item skipped"));
                    self.skip_item();
                }
            }
            match self.next() {
                Some(Tok::Comma) => continue,
                Some(Tok::RParen) => break,
                other => {
                    return Err(SchemaError::Parse(
                        self.line(),
                        format!("expected ',' or ')', got {other:?}"),
                    ))
                }
            }
        }
        if self.peek() == Some(&Tok::Semi) {
            self.pos += 1;
        }
        for pk in &pk_cols {
            if let Some(col) = columns.iter_mut().find(|c| &c.name == pk) {
                col.is_pk = true;
            } else {
                return Err(SchemaError::MissingFkColumn {
                    table: name.clone(),
                    column: pk.clone(),
                });
            }
        }
        for col in &mut columns {
            if col.is_pk {
                col.nullable = false;
            }
        }
        Ok(Table_and_fks { table: Table { name, columns }, fks })
    }
}

#[allow(non_camel_case_types)]
struct Table_and_fks {
    table: Table,
    fks: Vec<ForeignKey>,
}

/// Parse DDL text into a validated [`SchemaGraph`].
pub fn parse_ddl(text: &str, strict: bool) -> Result<ParsedDdl, SchemaError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, strict, warnings: Vec::new() };
    let mut graph = SchemaGraph::default();
    while p.peek().is_some() {
        let line = p.line();
        if p.eat_keyword("CREATE") {
            let parsed = p.parse_create_table()?;
            if graph.table(&parsed.table.name).is_some() {
                return Err(SchemaError::DuplicateTable(parsed.table.name));
            }
            graph.tables.push(parsed.table);
            graph.foreign_keys.extend(parsed.fks);
        } else if p.peek() == Some(&Tok::Semi) {
            p.pos += 1;
        } else if strict {
            return Err(SchemaError::Parse(line, "expected CREATE TABLE".into()));
        } else {
            p.warnings.push(format!("line {line}: unrecognized statement skipped"));
            p.skip_statement();
        }
    }
    graph.validate()?;
    Ok(ParsedDdl { graph, warnings: p.warnings })
}

/// Emit the canonical DDL form (see module docs).
pub fn emit_ddl(graph: &SchemaGraph) -> String {
    let mut out = String::new();
    let order = match graph.topo_order() {
        Some(o) => o,
        None => {
            out.push_str("-- warning: cyclic foreign keys; tables emitted alphabetically with forward references\n");
            let mut o: Vec<usize> = (0..graph.tables.len()).collect();
            o.sort_by(|&a, &b| graph.tables[a].name.cmp(&graph.tables[b].name));
            o
        }
    };
    for (pos, &ti) in order.iter().enumerate() {
        let table = &graph.tables[ti];
        if pos > 0 {
            out.push('\n');
        }
        out.push_str(&format!("CREATE TABLE {} (\n", table.name));
        let mut lines: Vec<String> = Vec::new();
        for col in &table.columns {
            let mut line = format!("  {} {}", col.name, col.datatype);
            if !col.nullable {
                line.push_str(" NOT NULL");
            }
            lines.push(line);
        }
        let pk: Vec<&str> =
            table.columns.iter().filter(|c| c.is_pk).map(|c| c.name.as_str()).collect();
        if !pk.is_empty() {
            lines.push(format!("  PRIMARY KEY ({})", pk.join(", ")));
        }
        let mut fks: Vec<&ForeignKey> =
            graph.foreign_keys.iter().filter(|f| f.child_table == table.name).collect();
        fks.sort();
        for fk in fks {
            lines.push(format!(
                "  FOREIGN KEY ({}) REFERENCES {} ({})",
                fk.child_column, fk.parent_table, fk.parent_column
            ));
        }
        out.push_str(&lines.join(",\n"));
        out.push_str("\n);\n");
    }
    out
}

/// Empirical statistics over a schema collection.
#[derive(Debug, Clone)]
pub struct SchemaStats {
    pub tables_per_schema: Empirical<usize>,
    pub columns_per_table: Empirical<usize>,
    pub datatype_dist: Empirical<DataType>,
    pub fk_per_table: Empirical<usize>,
    pub table_name_model: CharModel,
    pub column_name_model: CharModel,
}

pub fn fit_schema_stats(schemas: &[SchemaGraph]) -> SchemaStats {
    assert!(!schemas.is_empty(), "need at least one schema");
    let mut tables_per_schema = Empirical::new();
    let mut columns_per_table = Empirical::new();
    let mut datatype_dist = Empirical::new();
    let mut fk_per_table = Empirical::new();
    let mut table_name_model = CharModel::new(3);
    let mut column_name_model = CharModel::new(3);
    for schema in schemas {
        tables_per_schema.add(schema.tables.len());
        for table in &schema.tables {
            columns_per_table.add(table.columns.len());
            table_name_model.train(&table.name);
            for col in &table.columns {
                datatype_dist.add(col.datatype);
                column_name_model.train(&col.name);
            }
            let fks =
                schema.foreign_keys.iter().filter(|f| f.child_table == table.name).count();
            fk_per_table.add(fks);
        }
    }
    SchemaStats {
        tables_per_schema,
        columns_per_table,
        datatype_dist,
        fk_per_table,
        table_name_model,
        column_name_model,
    }
}

fn unique_name(model: &CharModel, fallback: &str, taken: &HashSet<String>, rng: &mut ChaCha8Rng) -> String {
    for _ in 0..10 {
        let name = model.generate(rng, 24);
        let name = name.trim_matches(|c: char| !c.is_ascii_alphanumeric()).to_lowercase();
        if !name.is_empty() && name.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
            && !taken.contains(&name)
        {
            return name;
        }
    }
    let mut k = 1;
    loop {
        let cand = format!("{fallback}{k}");
        if !taken.contains(&cand) {
            return cand;
        }
        k += 1;
    }
}

/// Sample a novel schema from fitted statistics. Every table gets an INT
/// primary key; foreign keys always point at earlier tables' primary
/// keys, so the result is acyclic by construction.
pub fn sample_schema(stats: &SchemaStats, rng_seed: u64) -> SchemaGraph {
    assert!(!stats.tables_per_schema.is_empty(), "stats are degenerate");
    let mut rng = seeded(rng_seed);
    let n_tables = stats.tables_per_schema.sample(&mut rng).max(1);
    let mut graph = SchemaGraph::default();
    let mut table_names: HashSet<String> = HashSet::new();
    for ti in 0..n_tables {
        let name = unique_name(&stats.table_name_model, "table", &table_names, &mut rng);
        table_names.insert(name.clone());
        let n_cols = stats.columns_per_table.sample(&mut rng).max(1);
        // Foreign-key columns count toward the drawn column total so the
        // sampled columns-per-table distribution tracks the fitted one.
        let n_fks = if ti == 0 {
            0
        } else {
            stats.fk_per_table.sample(&mut rng).min(ti).min(n_cols.saturating_sub(1))
        };
        let mut col_names: HashSet<String> = HashSet::new();
        let pk_name = unique_name(&stats.column_name_model, "id", &col_names, &mut rng);
        col_names.insert(pk_name.clone());
        let mut columns =
            vec![Column { name: pk_name, datatype: DataType::Int, nullable: false, is_pk: true }];
        for _ in 0..n_cols.saturating_sub(1 + n_fks) {
            let cname = unique_name(&stats.column_name_model, "col", &col_names, &mut rng);
            col_names.insert(cname.clone());
            let datatype = stats.datatype_dist.sample(&mut rng);
            columns.push(Column {
                name: cname,
                datatype,
                nullable: rng.gen::<f64>() < 0.3,
                is_pk: false,
            });
        }
        for _ in 0..n_fks {
            let parent_idx = rng.gen_range(0..ti);
            let parent = &graph.tables[parent_idx];
            let parent_pk =
                parent.columns.iter().find(|c| c.is_pk).expect("sampled tables have a pk");
            let cname = unique_name(&stats.column_name_model, "ref", &col_names, &mut rng);
            col_names.insert(cname.clone());
            columns.push(Column {
                name: cname.clone(),
                datatype: parent_pk.datatype,
                nullable: false,
                is_pk: false,
            });
            graph.foreign_keys.push(ForeignKey {
                child_table: name.clone(),
                child_column: cname,
                parent_table: parent.name.clone(),
                parent_column: parent_pk.name.clone(),
            });
        }
        graph.tables.push(Table { name, columns });
    }
    debug_assert!(graph.validate().is_ok());
    graph
}

/// One cell value of a populated table.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Varchar(String),
    Date(NaiveDate),
    Bool(bool),
    Null,
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
            Value::Varchar(s) => f.write_str(s),
            Value::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Null => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableRows {
    pub table: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

/// Populate every table with `rows_per_table` conforming rows.
///
/// Tables fill in parents-first order. INT primary keys run 1..=n;
/// foreign keys draw uniformly from the parent's generated keys; other
/// values are type-appropriate draws (INT 0..10000, FLOAT 0..1000,
/// VARCHAR from a name model trained on the schema's own identifiers and
/// truncated to the declared length, DATE uniform in 2000-01-01 ..
/// 2024-12-31). Nullable columns go NULL with probability 0.1. Cyclic
/// schemas are refused.
pub fn populate_rows(
    graph: &SchemaGraph,
    rows_per_table: usize,
    rng_seed: u64,
) -> Result<Vec<TableRows>, SchemaError> {
    assert!(rows_per_table >= 1, "rows_per_table must be >= 1");
    graph.validate()?;
    let order = graph.topo_order().ok_or(SchemaError::CyclicSchema)?;
    for table in &graph.tables {
        for col in &table.columns {
            if col.is_pk && col.datatype != DataType::Int {
                return Err(SchemaError::UnsupportedPkType {
                    table: table.name.clone(),
                    column: col.name.clone(),
                });
            }
        }
    }
    let mut name_model = CharModel::new(3);
    for table in &graph.tables {
        name_model.train(&table.name);
        for col in &table.columns {
            name_model.train(&col.name);
        }
    }
    let fk_of: HashMap<(&str, &str), &ForeignKey> = graph
        .foreign_keys
        .iter()
        .map(|f| ((f.child_table.as_str(), f.child_column.as_str()), f))
        .collect();
    let date_base = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    let date_end = NaiveDate::from_ymd_opt(2024, 12, 31).expect("valid date");
    let date_span = (date_end - date_base).num_days();

    let mut rng = seeded(rng_seed);
    let mut pk_values: HashMap<String, Vec<i64>> = HashMap::new();
    let mut out = Vec::new();
    for ti in order {
        let table = &graph.tables[ti];
        let mut rows = Vec::with_capacity(rows_per_table);
        for row_idx in 0..rows_per_table {
            let mut row = Vec::with_capacity(table.columns.len());
            for col in &table.columns {
                if col.is_pk {
                    row.push(Value::Int(row_idx as i64 + 1));
                    continue;
                }
                if col.nullable && rng.gen::<f64>() < 0.1 {
                    row.push(Value::Null);
                    continue;
                }
                if let Some(fk) = fk_of.get(&(table.name.as_str(), col.name.as_str())) {
                    let parents = &pk_values[&fk.parent_table];
                    row.push(Value::Int(parents[rng.gen_range(0..parents.len())]));
                    continue;
                }
                let value = match col.datatype {
                    DataType::Int => Value::Int(rng.gen_range(0..10_000)),
                    DataType::Float => Value::Float(rng.gen_range(0.0..1000.0)),
                    DataType::Varchar(n) => {
                        let mut s = name_model.generate(&mut rng, n.max(1) as usize);
                        if s.is_empty() {
                            s = "x".to_string();
                        }
                        s.truncate(n.max(1) as usize);
                        Value::Varchar(s)
                    }
                    DataType::Date => {
                        let off = rng.gen_range(0..=date_span);
                        Value::Date(date_base + chrono::Duration::days(off))
                    }
                    DataType::Bool => Value::Bool(rng.gen()),
                };
                row.push(value);
            }
            rows.push(row);
        }
        pk_values.insert(
            table.name.clone(),
            (1..=rows_per_table as i64).collect(),
        );
        out.push(TableRows {
            table: table.name.clone(),
            columns: table.columns.iter().map(|c| c.name.clone()).collect(),
            rows,
        });
    }
    Ok(out)
}

/// Write populated tables as one TSV file per table (header row, NULL as
/// an empty field).
pub fn write_table_files(tables: &[TableRows], dir: &std::path::Path) -> Result<(), SchemaError> {
    std::fs::create_dir_all(dir)?;
    for t in tables {
        let mut text = String::new();
        text.push_str(&t.columns.join("\t"));
        text.push('\n');
        for row in &t.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            text.push_str(&cells.join("\t"));
            text.push('\n');
        }
        std::fs::write(dir.join(format!("{}.tsv", t.table)), text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_TABLE_DDL: &str = "\
CREATE TABLE customer (
  id INT NOT NULL,
  name VARCHAR(40) NOT NULL,
  PRIMARY KEY (id)
);

CREATE TABLE orders (
  id INT NOT NULL,
  customer_id INT NOT NULL,
  placed DATE,
  PRIMARY KEY (id),
  FOREIGN KEY (customer_id) REFERENCES customer (id)
);
";

    #[test]
    fn single_table_parse_shape() {
        let ddl = "CREATE TABLE t (a INT PRIMARY KEY, b VARCHAR(10));";
        let parsed = parse_ddl(ddl, true).unwrap();
        let g = parsed.graph;
        assert_eq!(g.tables.len(), 1);
        assert_eq!(g.tables[0].columns.len(), 2);
        assert_eq!(g.foreign_keys.len(), 0);
        let a = g.tables[0].column("a").unwrap();
        assert!(a.is_pk);
        assert!(!a.nullable, "pk is implicitly not null");
        assert_eq!(g.tables[0].column("b").unwrap().datatype, DataType::Varchar(10));
    }

    #[test]
    fn fk_edge_parses_child_to_parent() {
        let parsed = parse_ddl(TWO_TABLE_DDL, true).unwrap();
        let g = parsed.graph;
        assert_eq!(g.foreign_keys.len(), 1);
        let fk = &g.foreign_keys[0];
        assert_eq!(
            (fk.child_table.as_str(), fk.child_column.as_str()),
            ("orders", "customer_id")
        );
        assert_eq!(
            (fk.parent_table.as_str(), fk.parent_column.as_str()),
            ("customer", "id")
        );
    }

    #[test]
    fn fk_to_missing_table_names_the_table() {
        let ddl = "CREATE TABLE t (a INT PRIMARY KEY, b INT, FOREIGN KEY (b) REFERENCES ghost (id));";
        match parse_ddl(ddl, true) {
            Err(SchemaError::MissingFkTable(name)) => assert_eq!(name, "ghost"),
            other => panic!("expected missing-table error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_table_and_type_mismatch_are_errors() {
        let dup = "CREATE TABLE t (a INT PRIMARY KEY); CREATE TABLE t (b INT PRIMARY KEY);";
        assert!(matches!(parse_ddl(dup, true), Err(SchemaError::DuplicateTable(_))));
        let mismatch = "\
CREATE TABLE p (id INT PRIMARY KEY);
CREATE TABLE c (id INT PRIMARY KEY, p_ref VARCHAR(8), FOREIGN KEY (p_ref) REFERENCES p (id));";
        assert!(matches!(parse_ddl(mismatch, true), Err(SchemaError::FkTypeMismatch { .. })));
    }

    #[test]
    fn fk_to_non_pk_parent_is_an_error() {
        let ddl = "\
CREATE TABLE p (id INT PRIMARY KEY, other INT);
CREATE TABLE c (id INT PRIMARY KEY, r INT, FOREIGN KEY (r) REFERENCES p (other));";
        assert!(matches!(parse_ddl(ddl, true), Err(SchemaError::FkParentNotPk { .. })));
    }

    #[test]
    fn lenient_mode_skips_unknown_statements_with_warnings() {
        let ddl = "DROP TABLE old;\nCREATE TABLE t (a INT PRIMARY KEY);";
        let parsed = parse_ddl(ddl, false).unwrap();
        assert_eq!(parsed.graph.tables.len(), 1);
        assert_eq!(parsed.warnings.len(), 1);
        assert!(matches!(parse_ddl(ddl, true), Err(SchemaError::Parse(1, _))));
    }

    #[test]
    fn strict_mode_reports_line_numbers() {
        let ddl = "CREATE TABLE t (\n  a INT PRIMARY KEY,\n  b BLOB\n);";
        match parse_ddl(ddl, true) {
            Err(SchemaError::Parse(line, msg)) => {
                assert_eq!(line, 3, "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let lenient = parse_ddl(ddl, false).unwrap();
        assert_eq!(lenient.graph.tables[0].columns.len(), 1);
        assert_eq!(lenient.warnings.len(), 1);
    }

    #[test]
    fn round_trip_is_isomorphic_and_emit_idempotent() {
        let parsed = parse_ddl(TWO_TABLE_DDL, true).unwrap();
        let emitted = emit_ddl(&parsed.graph);
        let back = parse_ddl(&emitted, true).unwrap();
        assert_eq!(parsed.graph.normalized(), back.graph.normalized());
        assert_eq!(emit_ddl(&back.graph), emitted);
    }

    #[test]
    fn emit_orders_parents_first() {
        // Declared child-first; canonical emission flips the order.
        let ddl = "\
CREATE TABLE zchild (id INT PRIMARY KEY, r INT, FOREIGN KEY (r) REFERENCES apparent (id));
CREATE TABLE apparent (id INT PRIMARY KEY);";
        let g = parse_ddl(ddl, true).unwrap().graph;
        let emitted = emit_ddl(&g);
        let parent_pos = emitted.find("CREATE TABLE apparent").unwrap();
        let child_pos = emitted.find("CREATE TABLE zchild").unwrap();
        assert!(parent_pos < child_pos);
    }

    #[test]
    fn cyclic_fk_emits_warning_comment_and_refuses_population() {
        let mut g = parse_ddl(
            "CREATE TABLE a (id INT PRIMARY KEY, rb INT);\nCREATE TABLE b (id INT PRIMARY KEY, ra INT);",
            true,
        )
        .unwrap()
        .graph;
        g.foreign_keys.push(ForeignKey {
            child_table: "a".into(),
            child_column: "rb".into(),
            parent_table: "b".into(),
            parent_column: "id".into(),
        });
        g.foreign_keys.push(ForeignKey {
            child_table: "b".into(),
            child_column: "ra".into(),
            parent_table: "a".into(),
            parent_column: "id".into(),
        });
        g.validate().unwrap();
        let emitted = emit_ddl(&g);
        assert!(emitted.starts_with("-- warning: cyclic"));
        // The emitted text still parses (comments are skipped).
        let back = parse_ddl(&emitted, true).unwrap();
        assert_eq!(back.graph.normalized(), g.normalized());
        assert!(matches!(populate_rows(&g, 3, 1), Err(SchemaError::CyclicSchema)));
    }

    #[test]
    fn stats_count_what_is_there() {
        let g = parse_ddl(TWO_TABLE_DDL, true).unwrap().graph;
        let stats = fit_schema_stats(std::slice::from_ref(&g));
        assert_eq!(stats.tables_per_schema.prob(&2), 1.0);
        assert_eq!(stats.columns_per_table.prob(&2), 0.5);
        assert_eq!(stats.columns_per_table.prob(&3), 0.5);
        // Datatypes: 3 INT, 1 VARCHAR, 1 DATE.
        assert_eq!(stats.datatype_dist.prob(&DataType::Int), 0.6);
        assert_eq!(stats.datatype_dist.prob(&DataType::Varchar(40)), 0.2);
        assert_eq!(stats.datatype_dist.prob(&DataType::Date), 0.2);
        assert_eq!(stats.fk_per_table.prob(&0), 0.5);
        assert_eq!(stats.fk_per_table.prob(&1), 0.5);
    }

    #[test]
    fn sampled_schemas_validate_and_are_acyclic() {
        let g = parse_ddl(TWO_TABLE_DDL, true).unwrap().graph;
        let stats = fit_schema_stats(std::slice::from_ref(&g));
        for seed in 0..200 {
            let sampled = sample_schema(&stats, seed);
            sampled.validate().unwrap();
            assert!(sampled.topo_order().is_some(), "cycle at seed {seed}");
            for t in &sampled.tables {
                assert!(t.columns.iter().any(|c| c.is_pk && c.datatype == DataType::Int));
            }
        }
    }

    #[test]
    fn sampled_column_counts_track_stats() {
        let g = parse_ddl(TWO_TABLE_DDL, true).unwrap().graph;
        let stats = fit_schema_stats(std::slice::from_ref(&g));
        let mut sampled = Empirical::new();
        for seed in 0..500 {
            let s = sample_schema(&stats, seed);
            for t in &s.tables {
                sampled.add(t.columns.len());
            }
        }
        let tv = sampled.tv_distance(&stats.columns_per_table);
        assert!(tv < 0.1, "columns-per-table tv = {tv}");
    }

    #[test]
    fn populated_pks_run_sequentially() {
        let g = parse_ddl("CREATE TABLE t (id INT PRIMARY KEY, v INT);", true).unwrap().graph;
        let tables = populate_rows(&g, 5, 3).unwrap();
        let ids: Vec<i64> = tables[0]
            .rows
            .iter()
            .map(|r| match r[0] {
                Value::Int(v) => v,
                _ => panic!("pk must be INT"),
            })
            .collect();
        assert_eq!(ids, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn referential_integrity_holds_by_brute_force_join() {
        let g = parse_ddl(TWO_TABLE_DDL, true).unwrap().graph;
        let tables = populate_rows(&g, 25, 17).unwrap();
        let by_name: std::collections::BTreeMap<&str, &TableRows> =
            tables.iter().map(|t| (t.table.as_str(), t)).collect();
        let parent = by_name["customer"];
        let pk_col = parent.columns.iter().position(|c| c == "id").unwrap();
        let parent_keys: HashSet<String> =
            parent.rows.iter().map(|r| r[pk_col].to_string()).collect();
        let child = by_name["orders"];
        let fk_col = child.columns.iter().position(|c| c == "customer_id").unwrap();
        for row in &child.rows {
            let v = &row[fk_col];
            assert!(!matches!(v, Value::Null), "fk declared NOT NULL");
            assert!(parent_keys.contains(&v.to_string()), "dangling fk {v}");
        }
    }

    #[test]
    fn varchar_values_respect_declared_length() {
        let g = parse_ddl("CREATE TABLE t (id INT PRIMARY KEY, tag VARCHAR(4));", true)
            .unwrap()
            .graph;
        let tables = populate_rows(&g, 50, 5).unwrap();
        let col = tables[0].columns.iter().position(|c| c == "tag").unwrap();
        for row in &tables[0].rows {
            match &row[col] {
                Value::Varchar(s) => assert!(s.len() <= 4, "{s}"),
                Value::Null => {}
                other => panic!("unexpected value {other:?}"),
            }
        }
    }

    #[test]
    fn dates_stay_in_documented_range() {
        let g = parse_ddl("CREATE TABLE t (id INT PRIMARY KEY, d DATE NOT NULL);", true)
            .unwrap()
            .graph;
        let tables = populate_rows(&g, 100, 5).unwrap();
        let col = tables[0].columns.iter().position(|c| c == "d").unwrap();
        let lo = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        let hi = NaiveDate::from_ymd_opt(2024, 12, 31).unwrap();
        for row in &tables[0].rows {
            match &row[col] {
                Value::Date(d) => assert!(*d >= lo && *d <= hi, "{d}"),
                other => panic!("unexpected value {other:?}"),
            }
        }
    }

    #[test]
    fn table_files_have_header_rows() {
        let g = parse_ddl(TWO_TABLE_DDL, true).unwrap().graph;
        let tables = populate_rows(&g, 3, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_table_files(&tables, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("customer.tsv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("id\tname"));
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn population_is_deterministic() {
        let g = parse_ddl(TWO_TABLE_DDL, true).unwrap().graph;
        let a = populate_rows(&g, 10, 9).unwrap();
        let b = populate_rows(&g, 10, 9).unwrap();
        for (ta, tb) in a.iter().zip(&b) {
            assert_eq!(ta.rows, tb.rows);
        }
    }
}
