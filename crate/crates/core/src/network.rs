//! DC network model, PTDF sensitivities and the parametric constraint system
//! `A p <= b + C w`, `e'p = e'(d - mu - w)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PTDF entries below this magnitude are set to zero.
pub const PTDF_ZERO: f64 = 1e-12;

/// The physical system, in per-unit on `base_mva`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerNetwork {
    pub case_id: String,
    pub base_mva: f64,
    /// External bus numbers, indexed like `demand`.
    pub bus_ids: Vec<u64>,
    pub demand: Vec<f64>,
    /// Forecast non-dispatchable injection per bus.
    pub forecast: Vec<f64>,
    pub gen_bus: Vec<usize>,
    pub pmin: Vec<f64>,
    pub pmax: Vec<f64>,
    pub cost: Vec<f64>,
    pub branch_from: Vec<usize>,
    pub branch_to: Vec<usize>,
    pub susceptance: Vec<f64>,
    pub fmin: Vec<f64>,
    pub fmax: Vec<f64>,
    pub ref_bus: usize,
}

impl PowerNetwork {
    pub fn n_bus(&self) -> usize {
        self.demand.len()
    }

    pub fn n_gen(&self) -> usize {
        self.gen_bus.len()
    }

    pub fn n_branch(&self) -> usize {
        self.branch_from.len()
    }

    /// `2(n + m) + 1`: both bounds on every generator and branch plus the balance row.
    pub fn constraint_count(&self) -> usize {
        2 * (self.n_gen() + self.n_branch()) + 1
    }

    /// SHA-256 over every field, hex encoded. Identifies the exact network an
    /// ensemble was learned on.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.case_id.as_bytes());
        h.update([0u8]);
        let floats = [
            std::slice::from_ref(&self.base_mva),
            &self.demand,
            &self.forecast,
            &self.pmin,
            &self.pmax,
            &self.cost,
            &self.susceptance,
            &self.fmin,
            &self.fmax,
        ];
        for block in floats {
            h.update((block.len() as u64).to_le_bytes());
            for x in block {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        let ints = [&self.gen_bus, &self.branch_from, &self.branch_to];
        for block in ints {
            h.update((block.len() as u64).to_le_bytes());
            for &x in block {
                h.update((x as u64).to_le_bytes());
            }
        }
        for &id in &self.bus_ids {
            h.update(id.to_le_bytes());
        }
        h.update((self.ref_bus as u64).to_le_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Generator-to-bus map `H` (v x n).
    pub fn gen_incidence(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.n_bus(), self.n_gen());
        for (g, &bus) in self.gen_bus.iter().enumerate() {
            h[(bus, g)] = 1.0;
        }
        h
    }

    /// Signed branch-bus incidence (m x v), +1 at the from end.
    pub fn branch_incidence(&self) -> DMatrix<f64> {
        let mut inc = DMatrix::zeros(self.n_branch(), self.n_bus());
        for (l, (&f, &t)) in self.branch_from.iter().zip(&self.branch_to).enumerate() {
            inc[(l, f)] += 1.0;
            inc[(l, t)] -= 1.0;
        }
        inc
    }

    /// Total net load `e'(d - mu)`.
    pub fn net_load(&self) -> f64 {
        self.demand
            .iter()
            .zip(&self.forecast)
            .map(|(d, mu)| d - mu)
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.n_bus();
        let n = self.n_gen();
        let m = self.n_branch();
        let lengths_ok = self.forecast.len() == v
            && self.pmin.len() == n
            && self.pmax.len() == n
            && self.cost.len() == n
            && self.branch_to.len() == m
            && self.susceptance.len() == m
            && self.fmin.len() == m
            && self.fmax.len() == m;
        if !lengths_ok {
            return Err(Error::InvalidCase("inconsistent vector lengths".into()));
        }
        if v == 0 || n == 0 {
            return Err(Error::InvalidCase(
                "network needs at least one bus and one generator".into(),
            ));
        }
        if self.ref_bus >= v {
            return Err(Error::InvalidCase(format!(
                "reference bus {} out of range",
                self.ref_bus
            )));
        }
        for g in 0..n {
            if self.gen_bus[g] >= v {
                return Err(Error::InvalidCase(format!(
                    "generator {g} bus out of range"
                )));
            }
            if !(self.pmin[g] <= self.pmax[g])
                || !self.pmin[g].is_finite()
                || !self.pmax[g].is_finite()
            {
                return Err(Error::InvalidCase(format!(
                    "generator {g} has bounds [{}, {}]",
                    self.pmin[g], self.pmax[g]
                )));
            }
        }
        for l in 0..m {
            if self.branch_from[l] >= v || self.branch_to[l] >= v {
                return Err(Error::InvalidCase(format!("branch {l} bus out of range")));
            }
            if !(self.fmin[l] <= self.fmax[l]) {
                return Err(Error::InvalidCase(format!(
                    "branch {l} has limits [{}, {}]",
                    self.fmin[l], self.fmax[l]
                )));
            }
            if self.susceptance[l] == 0.0 || !self.susceptance[l].is_finite() {
                return Err(Error::ZeroReactance { branch: l + 1 });
            }
        }
        let components = self.connected_components();
        if components != 1 {
            return Err(Error::IslandedNetwork { components });
        }
        Ok(())
    }

    pub fn connected_components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.n_bus()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = self.n_bus();
        for (&f, &t) in self.branch_from.iter().zip(&self.branch_to) {
            let (a, b) = (find(&mut parent, f), find(&mut parent, t));
            if a != b {
                parent[a] = b;
                components -= 1;
            }
        }
        components
    }
}

pub fn build_ptdf(net: &PowerNetwork) -> Result<DMatrix<f64>> {
    build_ptdf_with_reference(net, net.ref_bus)
}

/// PTDF matrix (m x v) with `reference` as the angle reference and slack.
///
/// The reduced bus susceptance matrix is factorized once; each bus column of
/// the angle sensitivity comes from one back-solve.
pub fn build_ptdf_with_reference(net: &PowerNetwork, reference: usize) -> Result<DMatrix<f64>> {
    let v = net.n_bus();
    let m = net.n_branch();
    if reference >= v {
        return Err(Error::InvalidCase(format!(
            "reference bus {reference} out of range"
        )));
    }
    if net.connected_components() != 1 {
        return Err(Error::SingularReducedLaplacian);
    }
    let reduced = |bus: usize| -> Option<usize> {
        match bus.cmp(&reference) {
            std::cmp::Ordering::Less => Some(bus),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(bus - 1),
        }
    };

    let mut laplacian = DMatrix::<f64>::zeros(v - 1, v - 1);
    for l in 0..m {
        let b = net.susceptance[l];
        let (f, t) = (reduced(net.branch_from[l]), reduced(net.branch_to[l]));
        if let Some(f) = f {
            laplacian[(f, f)] += b;
        }
        if let Some(t) = t {
            laplacian[(t, t)] += b;
        }
        if let (Some(f), Some(t)) = (f, t) {
            laplacian[(f, t)] -= b;
            laplacian[(t, f)] -= b;
        }
    }

    let angles = if v > 1 {
        let lu = laplacian.lu();
        let inverse = lu.try_inverse().ok_or(Error::SingularReducedLaplacian)?;
        if inverse.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularReducedLaplacian);
        }
        inverse
    } else {
        DMatrix::zeros(0, 0)
    };

    let mut ptdf = DMatrix::<f64>::zeros(m, v);
    for l in 0..m {
        let b = net.susceptance[l];
        let (f, t) = (reduced(net.branch_from[l]), reduced(net.branch_to[l]));
        for bus in 0..v {
            let Some(j) = reduced(bus) else { continue };
            let theta_f = f.map_or(0.0, |f| angles[(f, j)]);
            let theta_t = t.map_or(0.0, |t| angles[(t, j)]);
            let value = b * (theta_f - theta_t);
            ptdf[(l, bus)] = if value.abs() < PTDF_ZERO { 0.0 } else { value };
        }
    }
    Ok(ptdf)
}

/// Semantic tag of an inequality row. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowLabel {
    GenUpper(usize),
    GenLower(usize),
    FlowUpper(usize),
    FlowLower(usize),
}

impl fmt::Display for RowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowLabel::GenUpper(i) => write!(f, "GenUB{i}"),
            RowLabel::GenLower(i) => write!(f, "GenLB{i}"),
            RowLabel::FlowUpper(i) => write!(f, "FlowUB{i}"),
            RowLabel::FlowLower(i) => write!(f, "FlowLB{i}"),
        }
    }
}

impl FromStr for RowLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("invalid row label `{s}`"));
        let split = s.find(|c: char| c.is_ascii_digit()).ok_or_else(bad)?;
        let (tag, index) = s.split_at(split);
        let index: usize = index.parse().map_err(|_| bad())?;
        match tag {
            "GenUB" => Ok(RowLabel::GenUpper(index)),
            "GenLB" => Ok(RowLabel::GenLower(index)),
            "FlowUB" => Ok(RowLabel::FlowUpper(index)),
            "FlowLB" => Ok(RowLabel::FlowLower(index)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for RowLabel {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RowLabel {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The parametric LP `min c'p  s.t.  A p <= b + C w,  e'p = e'(d - mu) - e'w`.
///
/// Rows use a fixed global numbering `[GenUB 0..n | GenLB 0..n | FlowUB 0..m | FlowLB 0..m]`.
/// Rows whose right-hand side is infinite (unlimited branches) are absent from
/// the system but keep their index, so bases compare across runs.
#[derive(Debug, Clone)]
pub struct OpfProblem {
    n_gen: usize,
    n_branch: usize,
    n_bus: usize,
    cost: Vec<f64>,
    /// M, m x v.
    ptdf: DMatrix<f64>,
    /// M H, m x n.
    gen_ptdf: DMatrix<f64>,
    /// b over all global rows; +inf for absent rows.
    rhs: Vec<f64>,
    balance_rhs_base: f64,
    row_norms: Vec<f64>,
}

pub fn assemble_problem(net: &PowerNetwork, ptdf: DMatrix<f64>) -> Result<OpfProblem> {
    let (n, m, v) = (net.n_gen(), net.n_branch(), net.n_bus());
    if ptdf.nrows() != m || ptdf.ncols() != v {
        return Err(Error::InvalidCase(format!(
            "PTDF is {}x{}, expected {m}x{v}",
            ptdf.nrows(),
            ptdf.ncols()
        )));
    }
    let mut gen_ptdf = DMatrix::<f64>::zeros(m, n);
    for (g, &bus) in net.gen_bus.iter().enumerate() {
        gen_ptdf.set_column(g, &ptdf.column(bus));
    }
    let injection: DVector<f64> = DVector::from_iterator(
        v,
        net.forecast.iter().zip(&net.demand).map(|(mu, d)| mu - d),
    );
    let base_flow = &ptdf * injection;

    let mut rhs = Vec::with_capacity(2 * (n + m));
    rhs.extend_from_slice(&net.pmax);
    rhs.extend(net.pmin.iter().map(|p| -p));
    rhs.extend((0..m).map(|l| net.fmax[l] - base_flow[l]));
    rhs.extend((0..m).map(|l| -net.fmin[l] + base_flow[l]));
    for value in rhs.iter_mut() {
        if value.is_nan() {
            *value = f64::INFINITY;
        }
    }

    let mut row_norms = vec![1.0; 2 * n];
    let flow_norms: Vec<f64> = (0..m).map(|l| gen_ptdf.row(l).norm()).collect();
    row_norms.extend_from_slice(&flow_norms);
    row_norms.extend_from_slice(&flow_norms);

    Ok(OpfProblem {
        n_gen: n,
        n_branch: m,
        n_bus: v,
        cost: net.cost.clone(),
        ptdf,
        gen_ptdf,
        rhs,
        balance_rhs_base: net.net_load(),
        row_norms,
    })
}

impl OpfProblem {
    pub fn from_network(net: &PowerNetwork) -> Result<Self> {
        assemble_problem(net, build_ptdf(net)?)
    }

    pub fn n_gen(&self) -> usize {
        self.n_gen
    }

    pub fn n_branch(&self) -> usize {
        self.n_branch
    }

    pub fn n_bus(&self) -> usize {
        self.n_bus
    }

    /// Size of the global row index space, `2(n + m)`.
    pub fn n_rows(&self) -> usize {
        2 * (self.n_gen + self.n_branch)
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn ptdf(&self) -> &DMatrix<f64> {
        &self.ptdf
    }

    pub fn gen_ptdf(&self) -> &DMatrix<f64> {
        &self.gen_ptdf
    }

    /// `b` over the global row space; absent rows hold +inf.
    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn balance_rhs_base(&self) -> f64 {
        self.balance_rhs_base
    }

    pub fn balance_rhs(&self, omega: &[f64]) -> f64 {
        self.balance_rhs_base - omega.iter().sum::<f64>()
    }

    pub fn is_present(&self, row: usize) -> bool {
        self.rhs[row].is_finite()
    }

    pub fn row_norm(&self, row: usize) -> f64 {
        self.row_norms[row]
    }

    pub fn label(&self, row: usize) -> RowLabel {
        let (n, m) = (self.n_gen, self.n_branch);
        if row < n {
            RowLabel::GenUpper(row)
        } else if row < 2 * n {
            RowLabel::GenLower(row - n)
        } else if row < 2 * n + m {
            RowLabel::FlowUpper(row - 2 * n)
        } else {
            RowLabel::FlowLower(row - 2 * n - m)
        }
    }

    pub fn row_of(&self, label: RowLabel) -> usize {
        let (n, m) = (self.n_gen, self.n_branch);
        match label {
            RowLabel::GenUpper(i) => i,
            RowLabel::GenLower(i) => n + i,
            RowLabel::FlowUpper(l) => 2 * n + l,
            RowLabel::FlowLower(l) => 2 * n + m + l,
        }
    }

    /// Like [`row_of`](Self::row_of), but rejects labels outside this problem
    /// or naming an absent flow row.
    pub fn checked_row(&self, label: RowLabel) -> Result<usize> {
        let in_range = match label {
            RowLabel::GenUpper(i) | RowLabel::GenLower(i) => i < self.n_gen,
            RowLabel::FlowUpper(l) | RowLabel::FlowLower(l) => l < self.n_branch,
        };
        let row = self.row_of(label);
        if !in_range || !self.is_present(row) {
            return Err(Error::Domain(format!(
                "row {label} does not exist in this problem"
            )));
        }
        Ok(row)
    }

    pub fn row_labels(&self) -> Vec<RowLabel> {
        (0..self.n_rows()).map(|r| self.label(r)).collect()
    }

    /// Indices of the rows actually present in `A`.
    pub fn present_rows(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&r| self.is_present(r)).collect()
    }

    /// `M w`, the flow shift caused by the deviation.
    pub fn flow_shift(&self, omega: &[f64]) -> DVector<f64> {
        &self.ptdf * DVector::from_column_slice(omega)
    }

    /// `b_i + C_i w`, given the precomputed flow shift.
    pub fn row_rhs(&self, row: usize, shift: &DVector<f64>) -> f64 {
        let (n, m) = (self.n_gen, self.n_branch);
        if row < 2 * n {
            self.rhs[row]
        } else if row < 2 * n + m {
            self.rhs[row] - shift[row - 2 * n]
        } else {
            self.rhs[row] + shift[row - 2 * n - m]
        }
    }

    /// `a_i' p`.
    pub fn row_dot(&self, row: usize, p: &[f64]) -> f64 {
        match self.label(row) {
            RowLabel::GenUpper(i) => p[i],
            RowLabel::GenLower(i) => -p[i],
            RowLabel::FlowUpper(l) => self.flow_dot(l, p),
            RowLabel::FlowLower(l) => -self.flow_dot(l, p),
        }
    }

    fn flow_dot(&self, branch: usize, p: &[f64]) -> f64 {
        self.gen_ptdf
            .row(branch)
            .iter()
            .zip(p)
            .map(|(a, x)| a * x)
            .sum()
    }

    /// Dense row `a_i` of `A`.
    pub fn row_vector(&self, row: usize) -> DVector<f64> {
        let mut a = DVector::zeros(self.n_gen);
        match self.label(row) {
            RowLabel::GenUpper(i) => a[i] = 1.0,
            RowLabel::GenLower(i) => a[i] = -1.0,
            RowLabel::FlowUpper(l) => a.copy_from(&self.gen_ptdf.row(l).transpose()),
            RowLabel::FlowLower(l) => a.copy_from(&(-self.gen_ptdf.row(l).transpose())),
        }
        a
    }

    /// Dense row `C_i` of `C`.
    pub fn c_row(&self, row: usize) -> DVector<f64> {
        match self.label(row) {
            RowLabel::GenUpper(_) | RowLabel::GenLower(_) => DVector::zeros(self.n_bus),
            RowLabel::FlowUpper(l) => -self.ptdf.row(l).transpose(),
            RowLabel::FlowLower(l) => self.ptdf.row(l).transpose(),
        }
    }

    /// `A` over the present rows, in global row order.
    pub fn a_matrix(&self) -> DMatrix<f64> {
        let rows = self.present_rows();
        let mut a = DMatrix::zeros(rows.len(), self.n_gen);
        for (k, &r) in rows.iter().enumerate() {
            a.set_row(k, &self.row_vector(r).transpose());
        }
        a
    }

    /// `C` over the present rows, in global row order.
    pub fn c_matrix(&self) -> DMatrix<f64> {
        let rows = self.present_rows();
        let mut c = DMatrix::zeros(rows.len(), self.n_bus);
        for (k, &r) in rows.iter().enumerate() {
            c.set_row(k, &self.c_row(r).transpose());
        }
        c
    }

    /// Present `b` entries in global row order.
    pub fn b_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.present_rows().len(),
            self.rhs.iter().copied().filter(|b| b.is_finite()),
        )
    }

    /// Constraint count reported for the case: `2(n + m) + 1`, unlimited rows included.
    pub fn constraint_count(&self) -> usize {
        self.n_rows() + 1
    }

    pub fn objective(&self, p: &[f64]) -> f64 {
        self.cost.iter().zip(p).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of `A p <= b + C w` over present rows (<= 0 when satisfied).
    pub fn max_violation(&self, p: &[f64], shift: &DVector<f64>) -> f64 {
        let flows = &self.gen_ptdf * DVector::from_column_slice(p);
        let (n, m) = (self.n_gen, self.n_branch);
        let mut worst = f64::NEG_INFINITY;
        for (i, &x) in p.iter().enumerate() {
            worst = worst.max(x - self.rhs[i]);
            worst = worst.max(-x - self.rhs[n + i]);
        }
        for l in 0..m {
            let up = 2 * n + l;
            let down = 2 * n + m + l;
            if self.rhs[up].is_finite() {
                worst = worst.max(flows[l] - self.row_rhs(up, shift));
            }
            if self.rhs[down].is_finite() {
                worst = worst.max(-flows[l] - self.row_rhs(down, shift));
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_bus() -> PowerNetwork {
        PowerNetwork {
            case_id: "two_bus".into(),
            base_mva: 100.0,
            bus_ids: vec![1, 2],
            demand: vec![0.0, 1.0],
            forecast: vec![0.0, 0.0],
            gen_bus: vec![0, 1],
            pmin: vec![0.0, 0.0],
            pmax: vec![2.0, 2.0],
            cost: vec![1.0, 2.0],
            branch_from: vec![0],
            branch_to: vec![1],
            susceptance: vec![10.0],
            fmin: vec![-0.5],
            fmax: vec![0.5],
            ref_bus: 0,
        }
    }

    #[test]
    fn single_branch_carries_all_power() {
        let net = two_bus();
        let ptdf = build_ptdf(&net).unwrap();
        let q = DVector::from_vec(vec![1.0, -1.0]);
        let flow = &ptdf * q;
        assert!((flow[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reference_change_keeps_balanced_flows() {
        let net = two_bus();
        let a = build_ptdf_with_reference(&net, 0).unwrap();
        let b = build_ptdf_with_reference(&net, 1).unwrap();
        let q = DVector::from_vec(vec![0.3, -0.3]);
        assert!(((&a * &q) - (&b * &q)).amax() < 1e-12);
    }

    #[test]
    fn assembled_blocks_follow_row_order() {
        let net = two_bus();
        let prob = OpfProblem::from_network(&net).unwrap();
        assert_eq!(prob.n_rows(), 6);
        assert_eq!(prob.constraint_count(), net.constraint_count());
        assert_eq!(prob.label(0), RowLabel::GenUpper(0));
        assert_eq!(prob.label(3), RowLabel::GenLower(1));
        assert_eq!(prob.label(4), RowLabel::FlowUpper(0));
        assert_eq!(prob.label(5), RowLabel::FlowLower(0));
        for r in 0..4 {
            assert!(prob.c_row(r).iter().all(|&x| x == 0.0));
        }
        // b for the flow rows: fmax - M(mu - d) and -fmin + M(mu - d)
        let m_mu_d = -prob.ptdf()[(0, 1)];
        assert!((prob.rhs()[4] - (0.5 - m_mu_d)).abs() < 1e-12);
        assert!((prob.rhs()[5] - (0.5 + m_mu_d)).abs() < 1e-12);
        assert_eq!(prob.balance_rhs(&[0.1, 0.2]), 1.0 - 0.3);
    }

    #[test]
    fn unlimited_branch_rows_are_absent() {
        let mut net = two_bus();
        net.fmax = vec![f64::INFINITY];
        net.fmin = vec![f64::NEG_INFINITY];
        let prob = OpfProblem::from_network(&net).unwrap();
        assert_eq!(prob.present_rows(), vec![0, 1, 2, 3]);
        assert_eq!(prob.a_matrix().nrows(), 4);
        assert_eq!(prob.constraint_count(), 7);
    }

    #[test]
    fn labels_round_trip_through_text() {
        for label in [
            RowLabel::GenUpper(3),
            RowLabel::GenLower(0),
            RowLabel::FlowUpper(17),
            RowLabel::FlowLower(2),
        ] {
            assert_eq!(label.to_string().parse::<RowLabel>().unwrap(), label);
        }
        assert!("Gen3".parse::<RowLabel>().is_err());
    }

    #[test]
    fn disconnected_network_is_rejected() {
        let mut net = two_bus();
        net.demand.push(0.0);
        net.forecast.push(0.0);
        net.bus_ids.push(3);
        assert!(matches!(
            net.validate(),
            Err(Error::IslandedNetwork { components: 2 })
        ));
        assert!(matches!(
            build_ptdf(&net),
            Err(Error::SingularReducedLaplacian)
        ));
    }
}
