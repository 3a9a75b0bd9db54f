//! Published estimates used as arithmetic-consistency fixtures.
//!
//! Values are kept as the printed decimal strings. Differences are checked in
//! exact decimal arithmetic, so a cell that misses by exactly the rounding
//! allowance passes.

use std::str::FromStr;

use rust_decimal::Decimal;
use sha2::{Digest, Sha256};

use crate::cascade::{spectral_radius, VacancyMatrix};
use crate::error::{Error, Result};
use crate::estimator::FirstStage;
use crate::linalg::Mat;

pub const FIELDS: [&str; 7] = ["Business", "Social science", "Teaching", "Medicine", "Health", "STEM", "Other"];

/// Allowed rounding gap between a printed difference and the difference of
/// printed values.
pub const TOLERANCE: &str = "0.0005";

/// (T, se, W, se, first-stage F, N, Δ, se) per field.
const TABLE1: [[&str; 8]; 7] = [
    [".0278", ".0175", ".00449", ".0143", "391", "19882", ".0233", ".00829"],
    [".0476", ".018", ".0207", ".0152", "606", "47011", ".0269", ".00881"],
    [".0749", ".0284", ".0713", ".0274", "300", "11102", ".00358", ".00545"],
    [".0854", ".0287", ".0598", ".0258", "166", "21169", ".0256", ".0102"],
    [".0618", ".0224", ".0495", ".0214", "488", "26867", ".0123", ".00545"],
    [".064", ".0229", ".0453", ".0195", "332", "20358", ".0187", ".00848"],
    ["-.0185", ".0226", "-.0376", ".0205", "214", "3190", ".0191", ".00987"],
];

/// (T^f, se, W^f, se, T^m, se, W^m, se, T^f - T^m, se) per field.
const TABLE3: [[&str; 10]; 7] = [
    ["0.0255", "0.0276", "0.00326", "0.0251", "0.0334", "0.0206", "0.00942", "0.0177", "-0.00790", "0.0316"],
    ["0.0719", "0.0246", "0.0445", "0.0217", "0.00686", "0.0231", "-0.0182", "0.0202", "0.0650", "0.0313"],
    ["0.0547", "0.0323", "0.0502", "0.0318", "0.153", "0.0701", "0.148", "0.0677", "-0.0988", "0.0789"],
    ["0.0761", "0.0338", "0.0532", "0.0315", "0.100", "0.0538", "0.0734", "0.0478", "-0.0243", "0.0600"],
    ["0.0819", "0.0277", "0.0707", "0.0265", "-0.00918", "0.0356", "-0.0262", "0.0333", "0.0911", "0.0447"],
    ["0.00719", "0.0371", "0.00347", "0.0349", "0.0957", "0.0293", "0.0669", "0.0247", "-0.0885", "0.0462"],
    ["-0.0222", "0.0324", "-0.0489", "0.0285", "-0.0107", "0.0314", "-0.0121", "0.0280", "-0.0115", "0.0479"],
];

/// First-stage matrix: row j = field admitted to, column k = field applied to.
const FIGURE1_PI: [[&str; 7]; 7] = [
    [".2670541009616569", "-.0384864129529581", "-.0016430206137129", "-.0092456218646518", ".0043709882367854", "-.0419691280724044", "-.014420037814604"],
    ["-.024195442354217", ".1999331455557314", ".0027859570391869", "-.0155664809711328", "-.007059532975271", "-.0220592899416572", "-.0625125406110319"],
    ["-.0003548960191021", "-.0202945792634036", ".3255022286986096", "-.0030250070239469", "-.0112459471597067", "-.0069518679552031", "-.0372511827956035"],
    ["-.0084172650590387", ".0003203404944292", "-.0006890576970252", ".1831770052549356", "-.0120999410636746", "-.0069385699323124", ".0085097715448754"],
    ["-.0099895059220884", "-.0281982445985402", "-.013023118511289", "-.0182087352023665", ".2147643919044608", "-.0123064725383515", "-.0447319686965577"],
    ["-.0605912074807216", "-.01685973635159", "-.0105093170397931", "-.0370710834036859", "-.0087650386186476", ".2031049518893526", "-.0094744668772731"],
    ["-.0110624033029556", "-.0059732778602676", "-.0081034038905279", "-.0117065795626886", ".0006290901686215", "-.0048501720826346", ".4748847541135967"],
];

const FIGURE1_T: [[&str; 7]; 7] = [
    ["19.71414881322004", "-7.066693396011896", "-.2600169626022659", "-1.55357853528352", "1.051549618791635", "-4.557191627653074", "-.7108864030995523"],
    ["-2.34688204447353", "24.62445108109826", ".2465083879611087", "-1.848376087740449", "-1.042601925087281", "-2.366330478093262", "-2.366285729213455"],
    ["-.0727738609178356", "-4.229883291042067", "17.32240542340497", "-.7793669219857076", "-1.829538077384745", "-1.278035132853394", "-1.978843768538641"],
    ["-2.221203281993112", ".0923549499671415", "-.1726319738585581", "12.98956298290735", "-1.724831503016413", "-1.318321575805309", ".4949133787918358"],
    ["-1.764604857842328", "-5.364540784460895", "-1.663499313533389", "-1.888537845810508", "22.05053094058542", "-1.977390162826845", "-1.66251646233318"],
    ["-5.388927512277101", "-2.888578744245208", "-1.247678848419181", "-3.808801767550563", "-1.349084922240575", "18.14866539347028", "-.3445117541957404"],
    ["-2.279204049117297", "-1.851150988934317", "-1.499333668736404", "-2.818833753168166", ".134863036990328", "-1.008447446919249", "14.71918283660679"],
];

/// SHA-256 of [`canonical_text`], pinned so an accidental edit is caught.
pub const CHECKSUM: &str = "53a19eee4210596f9b5f4b0762f94edfead392ff2cd2c765e76f4ab97a65627a";

/// All fixture cells in a fixed order, one per line.
pub fn canonical_text() -> String {
    let mut out = String::new();
    let rows = TABLE1.iter().map(|r| r.as_slice()).chain(TABLE3.iter().map(|r| r.as_slice()));
    for row in rows.chain(FIGURE1_PI.iter().map(|r| r.as_slice())).chain(FIGURE1_T.iter().map(|r| r.as_slice())) {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn checksum() -> String {
    Sha256::digest(canonical_text().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn dec(s: &str) -> Decimal {
    // Printed values may omit the leading zero.
    let fixed = if let Some(rest) = s.strip_prefix("-.") {
        format!("-0.{rest}")
    } else if let Some(rest) = s.strip_prefix('.') {
        format!("0.{rest}")
    } else {
        s.to_string()
    };
    Decimal::from_str(&fixed).expect("fixture cells are valid decimals")
}

fn num(s: &str) -> f64 {
    dec(s).try_into().expect("fixture cells fit in f64")
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Table1Row {
    pub field: &'static str,
    pub t: f64,
    pub se_t: f64,
    pub w: f64,
    pub se_w: f64,
    pub first_stage_f: f64,
    pub n: u64,
    pub delta: f64,
    pub se_delta: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Table3Row {
    pub field: &'static str,
    pub t_f: f64,
    pub w_f: f64,
    pub t_m: f64,
    pub w_m: f64,
    pub diff: f64,
    /// Bootstrap standard errors in the column order above.
    pub se: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PublishedFixtures {
    pub table1: Vec<Table1Row>,
    pub table3: Vec<Table3Row>,
    pub figure1_pi: Vec<Vec<f64>>,
    pub figure1_t: Vec<Vec<f64>>,
}

impl PublishedFixtures {
    /// Loads the embedded fixtures after verifying the checksum.
    pub fn load() -> Result<Self> {
        let sum = checksum();
        if sum != CHECKSUM {
            return Err(Error::FixtureMismatch(vec![format!("checksum {sum} does not match pinned {CHECKSUM}")]));
        }
        let table1 = TABLE1
            .iter()
            .zip(FIELDS)
            .map(|(r, field)| Table1Row {
                field,
                t: num(r[0]),
                se_t: num(r[1]),
                w: num(r[2]),
                se_w: num(r[3]),
                first_stage_f: num(r[4]),
                n: r[5].parse().expect("integer"),
                delta: num(r[6]),
                se_delta: num(r[7]),
            })
            .collect();
        let table3 = TABLE3
            .iter()
            .zip(FIELDS)
            .map(|(r, field)| Table3Row {
                field,
                t_f: num(r[0]),
                w_f: num(r[2]),
                t_m: num(r[4]),
                w_m: num(r[6]),
                diff: num(r[8]),
                se: [num(r[1]), num(r[3]), num(r[5]), num(r[7]), num(r[9])],
            })
            .collect();
        let grid = |m: &[[&str; 7]; 7]| m.iter().map(|r| r.iter().map(|s| num(s)).collect()).collect();
        Ok(PublishedFixtures { table1, table3, figure1_pi: grid(&FIGURE1_PI), figure1_t: grid(&FIGURE1_T) })
    }

    pub fn figure1_first_stage(&self) -> Result<FirstStage> {
        FirstStage::from_rows(&self.figure1_pi)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FixtureCheck {
    pub name: String,
    pub expected: String,
    pub computed: String,
    pub gap: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FixtureReport {
    pub checks: Vec<FixtureCheck>,
    /// Upper-bound estimate of ρ(|M|) for the Figure 1 first stage.
    pub rho_abs: f64,
    pub negative_offdiag: usize,
    pub positive_offdiag: usize,
}

impl FixtureReport {
    pub fn failures(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.pass).map(|c| format!("{}: expected {}, computed {}", c.name, c.expected, c.computed)).collect()
    }
}

fn difference_check(name: String, a: &str, b: &str, printed: &str) -> FixtureCheck {
    let computed = dec(a) - dec(b);
    let gap = (computed - dec(printed)).abs();
    FixtureCheck {
        name,
        expected: dec(printed).to_string(),
        computed: computed.to_string(),
        gap: gap.to_string(),
        pass: gap <= dec(TOLERANCE),
    }
}

/// Runs every check without failing; see [`fixture_checks`].
pub fn fixture_report() -> Result<FixtureReport> {
    let fx = PublishedFixtures::load()?;
    let mut checks = Vec::new();
    for (r, field) in TABLE1.iter().zip(FIELDS) {
        checks.push(difference_check(format!("table1.{field}.cascade"), r[0], r[2], r[6]));
    }
    for (r, field) in TABLE3.iter().zip(FIELDS) {
        checks.push(difference_check(format!("table3.{field}.difference"), r[0], r[4], r[8]));
    }
    let fs = fx.figure1_first_stage()?;
    let vm = VacancyMatrix::from_first_stage(&fs)?;
    let rho_abs = spectral_radius(vm.matrix(), 10_000, 0);
    checks.push(FixtureCheck {
        name: "figure1.spectral_radius".into(),
        expected: "< 1".into(),
        computed: format!("{rho_abs:.6}"),
        gap: String::new(),
        pass: rho_abs < 1.0,
    });
    let pi: &Mat = fs.pi();
    let (mut neg, mut pos) = (0, 0);
    for j in 0..7 {
        for k in 0..7 {
            if j != k {
                if pi[(j, k)] < 0.0 {
                    neg += 1;
                } else if pi[(j, k)] > 0.0 {
                    pos += 1;
                }
            }
        }
    }
    checks.push(FixtureCheck {
        name: "figure1.substitution_sign".into(),
        expected: "negative > positive".into(),
        computed: format!("{neg} negative, {pos} positive"),
        gap: String::new(),
        pass: neg > pos,
    });
    Ok(FixtureReport { checks, rho_abs, negative_offdiag: neg, positive_offdiag: pos })
}

/// Table 1 cascade column, Table 3 difference column, and the Figure 1
/// spectral radius and sign pattern. Fails with every mismatching cell.
pub fn fixture_checks() -> Result<FixtureReport> {
    let report = fixture_report()?;
    let failures = report.failures();
    if failures.is_empty() {
        Ok(report)
    } else {
        Err(Error::FixtureMismatch(failures))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_is_pinned() {
        assert_eq!(checksum(), CHECKSUM);
    }

    #[test]
    fn decimals_parse_without_leading_zero() {
        assert_eq!(dec("-.0185").to_string(), "-0.0185");
        assert_eq!(dec(".064").to_string(), "0.064");
    }

    #[test]
    fn teaching_gender_gap_sits_exactly_on_the_allowance() {
        let c = difference_check("t".into(), "0.0547", "0.153", "-0.0988");
        assert_eq!(c.gap, "0.0005");
        assert!(c.pass);
        // The same subtraction in binary floating point lands just above it.
        assert!((0.0547f64 - 0.153 - (-0.0988)).abs() > 0.0005);
    }
}
