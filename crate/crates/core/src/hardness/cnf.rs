use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

/// Largest variable count accepted by [`dpll_sat`] unless overridden.
pub const DEFAULT_DPLL_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CnfError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: clause has {found} literals, expected exactly 3")]
    Arity { line: usize, found: usize },
    #[error("line {line}: variable {var} outside 1..={num_vars}")]
    VariableOutOfRange { line: usize, var: u64, num_vars: usize },
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("header declares {declared} clauses but {found} were read")]
    ClauseCount { declared: usize, found: usize },
    #[error("clause {clause} contains both a variable and its negation")]
    Complementary { clause: usize },
    #[error("formula has {num_vars} variables, above the solver cap of {cap}")]
    TooManyVariables { num_vars: usize, cap: usize },
}

/// A 3-CNF formula. Literals are nonzero signed 1-based variable indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<[i32; 3]>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<[i32; 3]>) -> Result<Self, CnfError> {
        for (i, c) in clauses.iter().enumerate() {
            for &lit in c {
                let var = lit.unsigned_abs() as u64;
                if lit == 0 || var as usize > num_vars {
                    return Err(CnfError::VariableOutOfRange {
                        line: i + 1,
                        var,
                        num_vars,
                    });
                }
            }
        }
        Ok(CnfFormula { num_vars, clauses })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[[i32; 3]] {
        &self.clauses
    }

    /// `assignment[n]` is the value of variable `n + 1`.
    pub fn evaluate(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|&l| literal_true(l, assignment)))
    }

    /// Index of the first clause mixing a variable with its negation.
    pub fn first_complementary_clause(&self) -> Option<usize> {
        self.clauses
            .iter()
            .position(|c| c.iter().any(|&l| c.contains(&-l)))
    }

    /// DIMACS text for this formula.
    pub fn to_dimacs(&self) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "p cnf {} {}", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            let _ = writeln!(out, "{} {} {} 0", c[0], c[1], c[2]);
        }
        out
    }
}

fn literal_true(lit: i32, assignment: &[bool]) -> bool {
    let v = assignment[lit.unsigned_abs() as usize - 1];
    if lit > 0 {
        v
    } else {
        !v
    }
}

/// Parses DIMACS CNF restricted to clauses of exactly three literals.
///
/// Comment lines (`c ...`) are skipped and a `%` line ends the input, as in
/// the SATLIB benchmark files. Clauses may span lines.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, CnfError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<i32> = Vec::new();
    let mut clause_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(CnfError::Syntax {
                    line: line_no,
                    message: "duplicate header".into(),
                });
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parsed = match parts.as_slice() {
                ["p", "cnf", n, m] => n.parse::<usize>().ok().zip(m.parse::<usize>().ok()),
                _ => None,
            };
            header = Some(parsed.ok_or_else(|| CnfError::Syntax {
                line: line_no,
                message: "expected `p cnf <vars> <clauses>`".into(),
            })?);
            continue;
        }
        let (num_vars, _) = header.ok_or(CnfError::MissingHeader)?;
        for tok in line.split_whitespace() {
            let lit: i64 = tok.parse().map_err(|_| CnfError::Syntax {
                line: line_no,
                message: alloc::format!("`{tok}` is not an integer literal"),
            })?;
            if current.is_empty() {
                clause_line = line_no;
            }
            if lit == 0 {
                if current.len() != 3 {
                    return Err(CnfError::Arity {
                        line: clause_line,
                        found: current.len(),
                    });
                }
                clauses.push([current[0], current[1], current[2]]);
                current.clear();
                continue;
            }
            let var = lit.unsigned_abs();
            if var as usize > num_vars || var > i32::MAX as u64 {
                return Err(CnfError::VariableOutOfRange {
                    line: line_no,
                    var,
                    num_vars,
                });
            }
            current.push(lit as i32);
        }
    }
    let (num_vars, declared) = header.ok_or(CnfError::MissingHeader)?;
    if !current.is_empty() {
        // Tolerate a missing terminator on the last clause.
        if current.len() != 3 {
            return Err(CnfError::Arity {
                line: clause_line,
                found: current.len(),
            });
        }
        clauses.push([current[0], current[1], current[2]]);
    }
    if clauses.len() != declared {
        return Err(CnfError::ClauseCount {
            declared,
            found: clauses.len(),
        });
    }
    CnfFormula::new(num_vars, clauses)
}

/// DPLL with unit propagation. Branches on the lowest unassigned variable,
/// trying `true` first, so the returned assignment is deterministic.
pub fn dpll_sat(formula: &CnfFormula, cap: usize) -> Result<Option<Vec<bool>>, CnfError> {
    if formula.num_vars > cap {
        return Err(CnfError::TooManyVariables {
            num_vars: formula.num_vars,
            cap,
        });
    }
    let mut assign = vec![None; formula.num_vars];
    Ok(search(&formula.clauses, &mut assign).then(|| assign.iter().map(|v| v.unwrap_or(false)).collect()))
}

fn search(clauses: &[[i32; 3]], assign: &mut Vec<Option<bool>>) -> bool {
    // Unit propagation to a fixed point.
    loop {
        let mut changed = false;
        for c in clauses {
            let mut unassigned = None;
            let mut open = 0;
            let mut satisfied = false;
            for &lit in c {
                match assign[lit.unsigned_abs() as usize - 1] {
                    Some(v) if v == (lit > 0) => {
                        satisfied = true;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        if unassigned != Some(lit) {
                            open += 1;
                        }
                        unassigned = Some(lit);
                    }
                }
            }
            if satisfied {
                continue;
            }
            match (open, unassigned) {
                (0, _) => return false,
                (1, Some(lit)) => {
                    assign[lit.unsigned_abs() as usize - 1] = Some(lit > 0);
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    let Some(var) = assign.iter().position(Option::is_none) else {
        return true;
    };
    for value in [true, false] {
        let mut trial = assign.clone();
        trial[var] = Some(value);
        if search(clauses, &mut trial) {
            *assign = trial;
            return true;
        }
    }
    false
}
