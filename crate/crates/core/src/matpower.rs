//! Reader for MATPOWER `.m` case files, the format PGLib-OPF ships in.
//!
//! Only `mpc.baseMVA`, `mpc.bus`, `mpc.gen`, `mpc.branch` and `mpc.gencost`
//! are interpreted. Every other assignment is skipped with a warning.

use std::collections::HashMap;
use std::path::Path;

use log::debug;

use crate::error::{Error, Result};
use crate::network::PowerNetwork;

const BUS_COLUMNS: usize = 13;
const GEN_COLUMNS: usize = 10;
const BRANCH_COLUMNS: usize = 11;
const GENCOST_COLUMNS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusType {
    Load,
    Generator,
    Reference,
    Isolated,
}

impl BusType {
    fn from_code(code: f64) -> Option<Self> {
        match code as i64 {
            1 => Some(BusType::Load),
            2 => Some(BusType::Generator),
            3 => Some(BusType::Reference),
            4 => Some(BusType::Isolated),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawBus {
    pub id: u64,
    pub bus_type: BusType,
    /// Active demand, MW.
    pub pd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawGen {
    pub bus: u64,
    pub pg: f64,
    pub pmax: f64,
    pub pmin: f64,
    pub in_service: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawBranch {
    pub from: u64,
    pub to: u64,
    pub r: f64,
    pub x: f64,
    /// Long-term thermal rating, MVA. Zero means unlimited.
    pub rate_a: f64,
    pub in_service: bool,
    pub angle_min: Option<f64>,
    pub angle_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostModel {
    PiecewiseLinear,
    Polynomial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawGenCost {
    pub model: CostModel,
    pub startup: f64,
    pub shutdown: f64,
    pub ncost: usize,
    pub coefficients: Vec<f64>,
}

impl RawGenCost {
    /// Marginal cost in $/MWh used by the linear program: the coefficient of
    /// p¹ for polynomials, the slope of the first segment for piecewise costs.
    pub fn linear_coefficient(&self) -> f64 {
        match self.model {
            CostModel::Polynomial => {
                if self.ncost >= 2 {
                    self.coefficients[self.ncost - 2]
                } else {
                    0.0
                }
            }
            CostModel::PiecewiseLinear => {
                let c = &self.coefficients;
                let dp = c[2] - c[0];
                if dp == 0.0 {
                    0.0
                } else {
                    (c[3] - c[1]) / dp
                }
            }
        }
    }
}

/// The interpreted tables of a case file, in MATPOWER units (MW, MVA, $/MWh).
#[derive(Debug, Clone, PartialEq)]
pub struct RawCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<RawBus>,
    pub gens: Vec<RawGen>,
    pub branches: Vec<RawBranch>,
    pub gencosts: Vec<RawGenCost>,
}

pub fn read_case(path: impl AsRef<Path>) -> Result<RawCase> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut raw = parse_matpower(&text)?;
    if raw.name.is_empty() {
        raw.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(raw)
}

/// Strip the `pglib_opf_` prefix so cases are named the way they are usually cited.
pub fn short_case_name(name: &str) -> &str {
    name.strip_prefix("pglib_opf_").unwrap_or(name)
}

struct Block {
    rows: Vec<Vec<f64>>,
}

pub fn parse_matpower(text: &str) -> Result<RawCase> {
    let mut name = String::new();
    let mut base_mva = None;
    let mut blocks: HashMap<String, Block> = HashMap::new();

    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l)));
    while let Some((lineno, line)) = lines.next() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("function") {
            if let Some((_, fname)) = rest.split_once('=') {
                name = fname.trim().trim_end_matches(';').trim().to_string();
            }
            continue;
        }
        let Some(rest) = trimmed.strip_prefix("mpc.") else {
            continue;
        };
        let Some((field, value)) = rest.split_once('=') else {
            return Err(Error::Syntax {
                line: lineno,
                message: format!("expected assignment, found `{trimmed}`"),
            });
        };
        let field = field.trim().to_string();
        let value = value.trim();

        if let Some(body) = value.strip_prefix('[') {
            let mut content = String::new();
            let mut closed = false;
            let mut chunk = body.to_string();
            loop {
                if let Some(end) = chunk.find(']') {
                    content.push_str(&chunk[..end]);
                    closed = true;
                    break;
                }
                content.push_str(&chunk);
                content.push('\n');
                match lines.next() {
                    Some((_, next)) => chunk = next.to_string(),
                    None => break,
                }
            }
            if !closed {
                return Err(Error::Syntax {
                    line: lineno,
                    message: format!("unterminated matrix block mpc.{field}"),
                });
            }
            if is_interpreted(&field) {
                let rows = parse_rows(&content, lineno)?;
                blocks.insert(field, Block { rows });
            } else {
                debug!("ignoring mpc.{field}");
            }
        } else if value.starts_with('{') {
            let mut chunk = value.to_string();
            while !chunk.contains('}') {
                match lines.next() {
                    Some((_, next)) => chunk = next.to_string(),
                    None => {
                        return Err(Error::Syntax {
                            line: lineno,
                            message: format!("unterminated cell block mpc.{field}"),
                        })
                    }
                }
            }
            debug!("ignoring mpc.{field}");
        } else if field == "baseMVA" {
            let token = value.trim_end_matches(';').trim();
            let parsed = parse_number(token).ok_or_else(|| Error::Syntax {
                line: lineno,
                message: format!("invalid baseMVA `{token}`"),
            })?;
            base_mva = Some(parsed);
        } else if field != "version" {
            debug!("ignoring mpc.{field}");
        }
    }

    let base_mva = base_mva.ok_or(Error::MissingTable("baseMVA"))?;
    let mut take = |table: &'static str, min_cols: usize| -> Result<Block> {
        let block = blocks.remove(table).ok_or(Error::MissingTable(table))?;
        check_widths(table, &block, min_cols)?;
        Ok(block)
    };
    let bus = take("bus", BUS_COLUMNS)?;
    let gen = take("gen", GEN_COLUMNS)?;
    let branch = take("branch", BRANCH_COLUMNS)?;
    let gencost = take("gencost", GENCOST_COLUMNS)?;

    let buses = bus
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let bus_type = BusType::from_code(row[1]).ok_or_else(|| {
                Error::InvalidCase(format!("bus row {} has unknown type {}", i + 1, row[1]))
            })?;
            Ok(RawBus {
                id: as_id(row[0], "bus", i)?,
                bus_type,
                pd: row[2],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let gens = gen
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok(RawGen {
                bus: as_id(row[0], "gen", i)?,
                pg: row[1],
                in_service: row[7] > 0.0,
                pmax: row[8],
                pmin: row[9],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let branches = branch
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok(RawBranch {
                from: as_id(row[0], "branch", i)?,
                to: as_id(row[1], "branch", i)?,
                r: row[2],
                x: row[3],
                rate_a: row[5],
                in_service: row[10] > 0.0,
                angle_min: row.get(11).copied(),
                angle_max: row.get(12).copied(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let gencosts = gencost
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| parse_gencost(row, i))
        .collect::<Result<Vec<_>>>()?;

    let raw = RawCase {
        name,
        base_mva,
        buses,
        gens,
        branches,
        gencosts,
    };
    raw.validate()?;
    Ok(raw)
}

fn is_interpreted(field: &str) -> bool {
    matches!(field, "bus" | "gen" | "branch" | "gencost")
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

fn parse_number(token: &str) -> Option<f64> {
    match token {
        "Inf" | "inf" => Some(f64::INFINITY),
        "-Inf" | "-inf" => Some(f64::NEG_INFINITY),
        _ => token.parse().ok(),
    }
}

fn parse_rows(content: &str, first_line: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (offset, line) in content.lines().enumerate() {
        for segment in line.split(';') {
            let tokens: Vec<&str> = segment
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .collect();
            if tokens.is_empty() {
                continue;
            }
            let row = tokens
                .iter()
                .map(|t| {
                    parse_number(t).ok_or_else(|| Error::Syntax {
                        line: first_line + offset,
                        message: format!("non-numeric entry `{t}`"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
    }
    Ok(rows)
}

fn check_widths(table: &'static str, block: &Block, min_cols: usize) -> Result<()> {
    let Some(first) = block.rows.first() else {
        return Err(Error::InvalidCase(format!("mpc.{table} is empty")));
    };
    let expected = first.len().max(min_cols);
    for (i, row) in block.rows.iter().enumerate() {
        if row.len() != expected {
            return Err(Error::InconsistentRow {
                table,
                row: i + 1,
                expected,
                found: row.len(),
            });
        }
    }
    Ok(())
}

fn as_id(value: f64, table: &str, row: usize) -> Result<u64> {
    if value >= 1.0 && value.fract() == 0.0 {
        Ok(value as u64)
    } else {
        Err(Error::InvalidCase(format!(
            "{table} row {} has invalid bus number {value}",
            row + 1
        )))
    }
}

fn parse_gencost(row: &[f64], index: usize) -> Result<RawGenCost> {
    let model = match row[0] as i64 {
        1 => CostModel::PiecewiseLinear,
        2 => CostModel::Polynomial,
        other => {
            return Err(Error::InvalidCase(format!(
                "gencost row {} has unknown model {other}",
                index + 1
            )))
        }
    };
    let ncost = row[3];
    if ncost < 0.0 || ncost.fract() != 0.0 {
        return Err(Error::InvalidCase(format!(
            "gencost row {} has invalid ncost {ncost}",
            index + 1
        )));
    }
    let ncost = ncost as usize;
    let needed = match model {
        CostModel::Polynomial => ncost,
        CostModel::PiecewiseLinear => 2 * ncost,
    };
    if model == CostModel::PiecewiseLinear && ncost < 2 {
        return Err(Error::InvalidCase(format!(
            "gencost row {} needs at least two breakpoints",
            index + 1
        )));
    }
    if row.len() - GENCOST_COLUMNS < needed {
        return Err(Error::InconsistentRow {
            table: "gencost",
            row: index + 1,
            expected: GENCOST_COLUMNS + needed,
            found: row.len(),
        });
    }
    Ok(RawGenCost {
        model,
        startup: row[1],
        shutdown: row[2],
        ncost,
        coefficients: row[GENCOST_COLUMNS..GENCOST_COLUMNS + needed].to_vec(),
    })
}

impl RawCase {
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashMap::with_capacity(self.buses.len());
        for (i, bus) in self.buses.iter().enumerate() {
            if ids.insert(bus.id, i).is_some() {
                return Err(Error::InvalidCase(format!(
                    "duplicate bus number {}",
                    bus.id
                )));
            }
        }
        let references = self
            .buses
            .iter()
            .filter(|b| b.bus_type == BusType::Reference)
            .count();
        if references != 1 {
            return Err(Error::InvalidCase(format!(
                "expected exactly one reference bus, found {references}"
            )));
        }
        for (i, g) in self.gens.iter().enumerate() {
            if !ids.contains_key(&g.bus) {
                return Err(Error::InvalidCase(format!(
                    "gen row {} references unknown bus {}",
                    i + 1,
                    g.bus
                )));
            }
        }
        for (i, br) in self.branches.iter().enumerate() {
            for end in [br.from, br.to] {
                if !ids.contains_key(&end) {
                    return Err(Error::InvalidCase(format!(
                        "branch row {} references unknown bus {end}",
                        i + 1
                    )));
                }
            }
        }
        // Reactive cost rows, when present, follow the active ones.
        if self.gencosts.len() < self.gens.len() {
            return Err(Error::InvalidCase(format!(
                "{} gencost rows for {} generators",
                self.gencosts.len(),
                self.gens.len()
            )));
        }
        if !(self.base_mva > 0.0) {
            return Err(Error::InvalidCase(format!(
                "baseMVA {} must be positive",
                self.base_mva
            )));
        }
        Ok(())
    }

    /// Counts over in-service equipment: (buses, branches, generators).
    pub fn in_service_counts(&self) -> (usize, usize, usize) {
        (
            self.buses.len(),
            self.branches.iter().filter(|b| b.in_service).count(),
            self.gens.iter().filter(|g| g.in_service).count(),
        )
    }

    pub fn to_network(&self) -> Result<PowerNetwork> {
        to_network(self)
    }
}

/// Convert to per-unit and drop out-of-service equipment.
pub fn to_network(raw: &RawCase) -> Result<PowerNetwork> {
    raw.validate()?;
    let base = raw.base_mva;
    let index: HashMap<u64, usize> = raw
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id, i))
        .collect();
    let ref_bus = raw
        .buses
        .iter()
        .position(|b| b.bus_type == BusType::Reference)
        .expect("validated");

    let mut net = PowerNetwork {
        case_id: short_case_name(&raw.name).to_string(),
        base_mva: base,
        bus_ids: raw.buses.iter().map(|b| b.id).collect(),
        demand: raw.buses.iter().map(|b| b.pd / base).collect(),
        forecast: vec![0.0; raw.buses.len()],
        ref_bus,
        ..PowerNetwork::default()
    };

    for (g, cost) in raw.gens.iter().zip(&raw.gencosts) {
        if !g.in_service {
            continue;
        }
        net.gen_bus.push(index[&g.bus]);
        net.pmin.push(g.pmin / base);
        net.pmax.push(g.pmax / base);
        net.cost.push(cost.linear_coefficient() * base);
    }

    for (i, br) in raw.branches.iter().enumerate() {
        if !br.in_service {
            continue;
        }
        if br.x == 0.0 {
            return Err(Error::ZeroReactance { branch: i + 1 });
        }
        let limit = if br.rate_a == 0.0 {
            f64::INFINITY
        } else {
            br.rate_a.abs() / base
        };
        net.branch_from.push(index[&br.from]);
        net.branch_to.push(index[&br.to]);
        net.susceptance.push(1.0 / br.x);
        net.fmax.push(limit);
        net.fmin.push(-limit);
    }

    net.validate()?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"
function mpc = tiny
mpc.version = '2';
mpc.baseMVA = 100.0;
%% bus data
mpc.bus = [
	1	 3	 50.0	 0.0	 0.0	 0.0	 1	 1.0	 0.0	 240.0	 1	 1.1	 0.9;
	2	 1	 100.0	 0.0	 0.0	 0.0	 1	 1.0	 0.0	 240.0	 1	 1.1	 0.9;
];
mpc.gen = [
	1	 0.0	 0.0	 10.0	 -10.0	 1.0	 100.0	 1	 200.0	 10.0;
	2	 0.0	 0.0	 10.0	 -10.0	 1.0	 100.0	 0	 200.0	 10.0;
];
mpc.gencost = [
	2	 0.0	 0.0	 3	   0.11	   5.0	   0.0;
	2	 0.0	 0.0	 3	   0.08	   1.2	   0.0;
];
mpc.branch = [
	1	 2	 0.01	 0.1	 0.0	 80.0	 80.0	 80.0	 0.0	 0.0	 1	 -30.0	 30.0;
];
mpc.bus_name = {
	'one';
	'two';
};
"#;

    #[test]
    fn parses_tables_and_name() {
        let raw = parse_matpower(TINY).unwrap();
        assert_eq!(raw.name, "tiny");
        assert_eq!(raw.base_mva, 100.0);
        assert_eq!(raw.buses.len(), 2);
        assert_eq!(raw.gens.len(), 2);
        assert_eq!(raw.branches.len(), 1);
        assert_eq!(raw.gencosts[0].linear_coefficient(), 5.0);
        assert!(!raw.gens[1].in_service);
        assert_eq!(raw.in_service_counts(), (2, 1, 1));
    }

    #[test]
    fn converts_to_per_unit() {
        let net = parse_matpower(TINY).unwrap().to_network().unwrap();
        assert_eq!(net.n_gen(), 1);
        assert_eq!(net.pmax, vec![2.0]);
        assert_eq!(net.pmin, vec![0.1]);
        assert_eq!(net.cost, vec![500.0]);
        assert_eq!(net.demand, vec![0.5, 1.0]);
        assert_eq!(net.fmax, vec![0.8]);
        assert_eq!(net.fmin, vec![-0.8]);
        assert_eq!(net.susceptance, vec![10.0]);
    }

    #[test]
    fn missing_gencost_is_reported() {
        let text = TINY.replace("mpc.gencost", "mpc.notcost");
        assert!(matches!(
            parse_matpower(&text),
            Err(Error::MissingTable("gencost"))
        ));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let row = "\t1\t 2\t 0.01\t 0.1\t 0.0\t 80.0\t 80.0\t 80.0\t 0.0\t 0.0\t 1\t -30.0\t 30.0;";
        assert!(TINY.contains(row));
        let text = TINY.replace(row, &format!("{row}\n\t1\t 2\t 0.01\t 0.1\t 80.0;"));
        assert!(matches!(
            parse_matpower(&text),
            Err(Error::InconsistentRow {
                table: "branch",
                ..
            })
        ));
    }

    #[test]
    fn unterminated_block_is_a_syntax_error() {
        let text =
            TINY.split("mpc.branch").next().unwrap().to_string() + "mpc.branch = [\n 1 2 3;\n";
        assert!(matches!(parse_matpower(&text), Err(Error::Syntax { .. })));
    }

    #[test]
    fn non_numeric_entry_is_a_syntax_error() {
        let text = TINY.replace("0.11", "abc");
        assert!(matches!(parse_matpower(&text), Err(Error::Syntax { .. })));
    }

    #[test]
    fn gencost_short_of_coefficients() {
        let text = TINY.replace("2	 0.0	 0.0	 3	   0.08", "2	 0.0	 0.0	 4	   0.08");
        assert!(matches!(
            parse_matpower(&text),
            Err(Error::InconsistentRow {
                table: "gencost",
                ..
            })
        ));
    }

    #[test]
    fn unknown_bus_reference_is_invalid() {
        let text = TINY.replace("\t2	 0.0	 0.0	 10.0", "\t7	 0.0	 0.0	 10.0");
        assert!(matches!(parse_matpower(&text), Err(Error::InvalidCase(_))));
    }

    #[test]
    fn out_of_service_branch_islands_the_network() {
        let text = TINY.replace("0.0	 1	 -30.0", "0.0	 0	 -30.0");
        let raw = parse_matpower(&text).unwrap();
        assert!(matches!(
            raw.to_network(),
            Err(Error::IslandedNetwork { components: 2 })
        ));
    }

    #[test]
    fn zero_rate_a_means_unlimited() {
        let text = TINY.replace("80.0	 80.0	 80.0", "0.0	 0.0	 0.0");
        let net = parse_matpower(&text).unwrap().to_network().unwrap();
        assert_eq!(net.fmax, vec![f64::INFINITY]);
        assert_eq!(net.fmin, vec![f64::NEG_INFINITY]);
    }

    #[test]
    fn piecewise_cost_uses_first_slope() {
        let cost = RawGenCost {
            model: CostModel::PiecewiseLinear,
            startup: 0.0,
            shutdown: 0.0,
            ncost: 3,
            coefficients: vec![0.0, 0.0, 10.0, 150.0, 20.0, 400.0],
        };
        assert_eq!(cost.linear_coefficient(), 15.0);
    }
}
