use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

/// One consumer type with linear demand `q = a + B p` and outcome `cᵀq`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Consumer {
    pub intercept: Vec<f64>,
    /// Rows of B.
    pub slope: Vec<Vec<f64>>,
    pub outcome: Vec<f64>,
}

/// K goods in fixed supply, allocated by prices that clear the market.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MarketConfig {
    pub consumers: Vec<Consumer>,
    pub supply: Vec<f64>,
}

impl MarketConfig {
    pub fn k(&self) -> usize {
        self.supply.len()
    }

    fn slope(&self, i: usize) -> Mat {
        let k = self.k();
        Mat::from_fn(k, k, |r, c| self.consumers[i].slope[r][c])
    }

    fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 || self.consumers.is_empty() {
            return Err(Error::InvalidInput("market needs at least one good and one consumer".into()));
        }
        if self.supply.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidInput("supplies must be positive".into()));
        }
        for (i, c) in self.consumers.iter().enumerate() {
            let ok = c.intercept.len() == k && c.outcome.len() == k && c.slope.len() == k && c.slope.iter().all(|r| r.len() == k);
            if !ok {
                return Err(Error::InvalidInput(format!("consumer {i} does not have {k} goods")));
            }
        }
        Ok(())
    }

    /// Σ_i B_i, required to be negative definite.
    fn aggregate_slope(&self) -> Result<Mat> {
        let k = self.k();
        let b = (0..self.consumers.len()).fold(Mat::zeros(k, k), |acc, i| acc + self.slope(i));
        let sym = (&b + b.transpose()) * 0.5;
        if sym.symmetric_eigen().eigenvalues.iter().any(|e| *e >= 0.0) {
            return Err(Error::NoEquilibrium("aggregate demand slope is not negative definite".into()));
        }
        Ok(b)
    }

    /// Market-clearing prices `p = B⁻¹(Q̄ - Σ a_i)` and each consumer's bundle.
    pub fn equilibrium(&self, supply: &[f64]) -> Result<(Vector, Vec<Vector>)> {
        self.validate()?;
        let b = self.aggregate_slope()?;
        let k = self.k();
        let a_sum = self.consumers.iter().fold(Vector::zeros(k), |acc, c| acc + Vector::from_column_slice(&c.intercept));
        let rhs = Vector::from_column_slice(supply) - a_sum;
        let p = linalg::solve_square(&b, &rhs).ok_or_else(|| Error::NoEquilibrium("aggregate slope is singular".into()))?;
        let q: Vec<Vector> = (0..self.consumers.len()).map(|i| self.demand(i, &p)).collect();
        if let Some(i) = q.iter().position(|qi| qi.iter().any(|v| *v < 0.0)) {
            return Err(Error::NoEquilibrium(format!("consumer {i} would demand a negative quantity")));
        }
        Ok((p, q))
    }

    fn demand(&self, i: usize, p: &Vector) -> Vector {
        Vector::from_column_slice(&self.consumers[i].intercept) + self.slope(i) * p
    }

    fn total_outcome(&self, q: &[Vector]) -> f64 {
        self.consumers.iter().zip(q).map(|(c, qi)| Vector::from_column_slice(&c.outcome).dot(qi)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MarketOracle {
    pub good: usize,
    pub step: f64,
    pub prices: Vec<f64>,
    pub prices_expanded: Vec<f64>,
    /// Change in each consumer's bundle.
    pub reallocation: Vec<Vec<f64>>,
    pub total_change: f64,
    /// `total_change / step`.
    pub per_unit: f64,
}

/// Clears the market at Q̄ and at Q̄ + step·e_k and reports the change in
/// total outcome per unit of added supply.
pub fn market_oracle(mkt: &MarketConfig, k: usize, step: f64) -> Result<MarketOracle> {
    if k >= mkt.k() {
        return Err(Error::InvalidInput(format!("good {} does not exist", k + 1)));
    }
    if !(step != 0.0 && step.is_finite()) {
        return Err(Error::InvalidInput("step must be finite and nonzero".into()));
    }
    let (p0, q0) = mkt.equilibrium(&mkt.supply)?;
    let mut supply = mkt.supply.clone();
    supply[k] += step;
    let (p1, q1) = mkt.equilibrium(&supply)?;
    let total_change = mkt.total_outcome(&q1) - mkt.total_outcome(&q0);
    Ok(MarketOracle {
        good: k,
        step,
        prices: p0.iter().copied().collect(),
        prices_expanded: p1.iter().copied().collect(),
        reallocation: q0.iter().zip(&q1).map(|(a, b)| (b - a).iter().copied().collect()).collect(),
        total_change,
        per_unit: total_change / step,
    })
}

/// Consumer-level data with prices as instruments: every consumer faces the
/// same 2^K factorial of price perturbations `p* ± h` around equilibrium plus
/// `p*` itself. Treatments are the quantities bought, the outcome is `cᵀq`,
/// and each consumer is a cluster.
pub fn market_dataset(mkt: &MarketConfig, h: f64) -> Result<Dataset> {
    let (p_star, _) = mkt.equilibrium(&mkt.supply)?;
    let k = mkt.k();
    let mut prices = vec![p_star.clone()];
    for mask in 0..(1usize << k) {
        prices.push(Vector::from_fn(k, |j, _| p_star[j] + if mask >> j & 1 == 1 { h } else { -h }));
    }
    let n = prices.len() * mkt.consumers.len();
    let (mut y, mut a, mut z) = (Vector::zeros(n), Mat::zeros(n, k), Mat::zeros(n, k));
    let mut cluster = Vec::with_capacity(n);
    let mut row = 0;
    for (i, c) in mkt.consumers.iter().enumerate() {
        for p in &prices {
            let q = mkt.demand(i, p);
            y[row] = Vector::from_column_slice(&c.outcome).dot(&q);
            a.set_row(row, &q.transpose());
            z.set_row(row, &p.transpose());
            cluster.push(format!("consumer{}", i + 1));
            row += 1;
        }
    }
    Dataset::new_continuous(y, a, z, Mat::from_element(n, 1, 1.0), cluster, None)
}
