//! Closed-form and series reference solutions, plus published benchmark values.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Simply supported rectangle under `p0 sin(πx/a) sin(πy/b)`.
pub fn navier_deflection(x: f64, y: f64, a: f64, b: f64, p0: f64, d: f64) -> f64 {
    let s = 1.0 / (a * a) + 1.0 / (b * b);
    p0 * (PI * x / a).sin() * (PI * y / b).sin() / (PI.powi(4) * d * s * s)
}

fn annular_check(r: f64, a: f64, b: f64) -> Result<()> {
    if !(0.0 < b && b < a) {
        return Err(Error::InvalidConfig(format!("annulus needs 0 < b < a, got b={b}, a={a}")));
    }
    let tol = 1e-12 * a;
    if !(r >= b - tol && r <= a + tol) {
        return Err(Error::OutOfDomain(format!("radius {r} outside [{b}, {a}]")));
    }
    Ok(())
}

struct AnnularCoeffs {
    beta: f64,
    kappa: f64,
    alpha1: f64,
    alpha2: f64,
}

fn annular_coeffs(a: f64, b: f64, nu: f64) -> AnnularCoeffs {
    let beta = b / a;
    let b2 = beta * beta;
    let kappa = b2 / (1.0 - b2) * beta.ln();
    AnnularCoeffs {
        beta,
        kappa,
        alpha1: (3.0 + nu) * (1.0 - b2) - 4.0 * (1.0 + nu) * b2 * kappa,
        alpha2: (3.0 + nu) + 4.0 * (1.0 + nu) * kappa,
    }
}

/// Annulus with a simply supported outer edge `r = a` and a free inner edge
/// `r = b`, under uniform pressure `q`.
///
/// This is the exact axisymmetric solution of `D∇⁴w = q` with `w = M_r = 0`
/// at `r = a` and `M_r = Q_r = 0` at `r = b`. It equals
/// [`annular_deflection_printed`] plus `16β²κ(1−ρ²) − 8β²ρ² ln ρ` inside the
/// braces; the commonly quoted form without those terms does not satisfy the
/// edge conditions.
pub fn annular_deflection(r: f64, a: f64, b: f64, q: f64, d: f64, nu: f64) -> Result<f64> {
    annular_check(r, a, b)?;
    let c = annular_coeffs(a, b, nu);
    let rho = (r / a).clamp(c.beta, 1.0);
    let b2 = c.beta * c.beta;
    let lr = rho.ln();
    let braces = -(1.0 - rho.powi(4)) + 2.0 * c.alpha1 / (1.0 + nu) * (1.0 - rho * rho)
        - 4.0 * c.alpha2 * b2 / (1.0 - nu) * lr
        + 16.0 * b2 * c.kappa * (1.0 - rho * rho)
        - 8.0 * b2 * rho * rho * lr;
    Ok(q * a.powi(4) / (64.0 * d) * braces)
}

/// The widely reproduced closed form for the same annulus, kept for
/// comparison. It vanishes at `r = a` but leaves a residual radial moment
/// there and a residual shear on the inner edge.
pub fn annular_deflection_printed(r: f64, a: f64, b: f64, q: f64, d: f64, nu: f64) -> Result<f64> {
    annular_check(r, a, b)?;
    let c = annular_coeffs(a, b, nu);
    let rho = (r / a).clamp(c.beta, 1.0);
    let braces = -(1.0 - rho.powi(4)) + 2.0 * c.alpha1 / (1.0 + nu) * (1.0 - rho * rho)
        - 4.0 * c.alpha2 * c.beta * c.beta / (1.0 - nu) * rho.ln();
    Ok(q * a.powi(4) / (64.0 * d) * braces)
}

pub const WINKLER_TERMS: usize = 199;

/// Simply supported rectangle on a Winkler foundation of modulus `k` under
/// uniform pressure `p`; double sine series over odd `m, n ≤ max_term`.
#[allow(clippy::too_many_arguments)]
pub fn winkler_deflection(x: f64, y: f64, a: f64, b: f64, p: f64, d: f64, k: f64, max_term: usize) -> f64 {
    let odd: Vec<f64> = (1..=max_term.max(1)).step_by(2).map(|m| m as f64).collect();
    let sx: Vec<f64> = odd.iter().map(|m| (m * PI * x / a).sin()).collect();
    let sy: Vec<f64> = odd.iter().map(|n| (n * PI * y / b).sin()).collect();
    let pi4 = PI.powi(4);
    let mut w = 0.0;
    for (i, m) in odd.iter().enumerate() {
        let mm = m * m / (a * a);
        let mut row = 0.0;
        for (j, n) in odd.iter().enumerate() {
            let s = mm + n * n / (b * b);
            row += sy[j] / (n * (pi4 * d * s * s + k));
        }
        w += sx[i] / m * row;
    }
    16.0 * p / (PI * PI) * w
}

/// `‖pred − exact‖ / ‖exact‖` in the ℓ² sense.
pub fn relative_error(pred: &[f64], exact: &[f64]) -> Result<f64> {
    if pred.len() != exact.len() {
        return Err(Error::Dimension(format!("relative error over {} vs {} samples", pred.len(), exact.len())));
    }
    let num: f64 = pred.iter().zip(exact).map(|(p, e)| (p - e).powi(2)).sum();
    let den: f64 = exact.iter().map(|e| e * e).sum();
    if den == 0.0 {
        return Err(Error::Degenerate("exact field has zero norm".into()));
    }
    Ok((num / den).sqrt())
}

/// Parses a decimal-comma number such as `"19,7390"`. `"NaN"` maps to NaN.
pub fn parse_decimal_comma(s: &str) -> Result<f64> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    if t.contains('.') {
        return Err(Error::Parse(format!("expected a decimal comma in {s:?}")));
    }
    t.replace(',', ".").parse().map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RefTable {
    /// Frequency parameter of an SSSS square plate with a central square cutout.
    CutoutFrequency,
    /// Same plate at cutout ratio 0.4 with other edge conditions.
    CutoutEdges,
    /// Buckling parameter of simply supported skew plates.
    SkewSimplySupported,
    /// Buckling parameter of clamped skew plates, aspect ratio 1.
    SkewClamped,
}

impl RefTable {
    pub fn name(self) -> &'static str {
        match self {
            RefTable::CutoutFrequency => "cutout_frequency",
            RefTable::CutoutEdges => "cutout_edges",
            RefTable::SkewSimplySupported => "skew_simply_supported",
            RefTable::SkewClamped => "skew_clamped",
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            RefTable::CutoutFrequency => &["DAEM", "HBM", "Modified Ritz", "FEM", "Discrete Ritz"],
            RefTable::CutoutEdges => &["DAEM"],
            RefTable::SkewSimplySupported | RefTable::SkewClamped => {
                &["DAEM", "Rayleigh-Ritz", "FEM", "CQUAD4", "CQUAD8"]
            }
        }
    }

    /// Column used when a run is compared automatically.
    pub fn default_column(self) -> &'static str {
        match self {
            RefTable::CutoutFrequency => "HBM",
            RefTable::CutoutEdges => "DAEM",
            RefTable::SkewSimplySupported | RefTable::SkewClamped => "Rayleigh-Ritz",
        }
    }

    pub const ALL: [RefTable; 4] =
        [RefTable::CutoutFrequency, RefTable::CutoutEdges, RefTable::SkewSimplySupported, RefTable::SkewClamped];
}

/// Row key. `ratio` is the cutout ratio for the vibration tables and the
/// aspect ratio a/b for the skew tables.
#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    pub edges: String,
    pub ratio: f64,
    pub angle_deg: f64,
}

impl Case {
    pub fn new(edges: &str, ratio: f64, angle_deg: f64) -> Self {
        Case { edges: edges.to_string(), ratio, angle_deg }
    }

    fn matches(&self, other: &Case) -> bool {
        self.edges == other.edges
            && (self.ratio - other.ratio).abs() < 1e-9
            && (self.angle_deg - other.angle_deg).abs() < 1e-9
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryStatus {
    Ok,
    /// Printed as zero, meaning no value was reported.
    Missing,
    /// Inconsistent with its neighbours; excluded from comparisons.
    Suspect,
}

#[derive(Clone, Debug)]
pub struct ReferenceEntry {
    pub table: RefTable,
    pub row: usize,
    pub case: Case,
    pub column: &'static str,
    /// The value exactly as published.
    pub raw: &'static str,
    pub value: f64,
    pub status: EntryStatus,
}

const CUTOUT_FREQUENCY: [(&str, [&str; 5]); 10] = [
    ("0", ["19,7382", "19,7390", "19,7400", "19,7520", "19,7390"]),
    ("0,1", ["19,3508", "19,4440", "19,1830", "19,3570", "19,4130"]),
    ("0,2", ["19,0284", "19,1280", "18,7620", "19,1200", "19,0380"]),
    ("0,3", ["19,3834", "19,4450", "19,1830", "19,3570", "19,3910"]),
    ("0,4", ["20,8201", "20,7530", "20,7850", "20,7320", "20,7240"]),
    ("0,5", ["23,4641", "23,4530", "23,6640", "23,2350", "23,4410"]),
    ("0,6", ["28,2706", "28,3750", "28,8440", "28,2410", "28,5260"]),
    ("0,7", ["38,1596", "37,5720", "38,1580", "35,5790", "37,8920"]),
    ("0,8", ["58,0804", "57,4120", "58,0620", "57,4520", "57,8380"]),
    ("0,9", ["120,9580", "120,0200", "121,2300", "120,3900", "120,9900"]),
];

const CUTOUT_EDGES: [(&str, &str); 2] = [("CCCC", "49,3091"), ("CSCS", "35,4996")];

const SKEW_SIMPLY_SUPPORTED: [(&str, &str, [&str; 5]); 16] = [
    ("0,5", "0", ["6,2575", "6,2500", "6,2510", "6,2010", "6,2180"]),
    ("0,5", "15", ["7,0172", "7,0000", "6,9800", "6,8550", "6,9080"]),
    ("0,5", "30", ["9,9614", "10,0200", "9,9400", "9,8950", "10,0000"]),
    ("0,5", "45", ["19,4074", "19,3000", "9,4200", "18,9510", "19,2520"]),
    ("1", "0", ["4,0007", "4,0000", "4,0000", "3,9190", "4,0000"]),
    ("1", "15", ["4,5073", "4,4800", "4,4000", "4,3060", "4,3550"]),
    ("1", "30", ["5,8504", "6,4100", "5,9300", "5,7610", "5,8750"]),
    ("1", "45", ["10,5208", "12,3000", "10,3600", "9,5260", "9,9540"]),
    ("1,5", "0", ["4,3710", "0,0000", "0,0000", "4,2560", "4,2700"]),
    ("1,5", "15", ["4,6558", "4,7700", "4,6800", "4,6400", "4,6480"]),
    ("1,5", "30", ["5,9504", "6,3700", "5,8900", "5,9550", "5,8650"]),
    ("1,5", "45", ["9,1843", "10,9000", "8,9500", "9,0760", "9,1390"]),
    ("2", "0", ["3,9354", "0,0000", "0,0000", "3,8850", "3,9030"]),
    ("2", "15", ["4,3499", "4,3300", "4,3400", "4,2710", "4,3130"]),
    ("2", "30", ["5,5677", "6,0300", "5,5900", "5,5960", "5,6050"]),
    ("2", "45", ["8,9418", "10,3000", "8,8000", "8,8550", "8,8710"]),
];

const SKEW_CLAMPED: [(&str, [&str; 5]); 4] = [
    ("0", ["10,0909", "10,0000", "10,0800", "9,8540", "10,0000"]),
    ("15", ["10,7821", "10,9000", "10,8400", "10,6900", "10,7750"]),
    ("30", ["13,7013", "13,5800", "13,6000", "13,5030", "13,5370"]),
    ("45", ["20,9890", "20,4000", "20,7600", "20,0920", "20,1050"]),
];

/// Relative deviation from the row median above which a value is flagged.
const SUSPECT_DEVIATION: f64 = 0.3;

fn num(s: &str) -> f64 {
    parse_decimal_comma(s).expect("embedded constant")
}

fn push_row(out: &mut Vec<ReferenceEntry>, table: RefTable, row: usize, case: Case, raws: &[&'static str]) {
    let values: Vec<f64> = raws.iter().map(|r| num(r)).collect();
    let mut present: Vec<f64> = values.iter().copied().filter(|v| *v != 0.0).collect();
    present.sort_by(f64::total_cmp);
    let median = present.get(present.len() / 2).copied().unwrap_or(0.0);
    for (k, (&raw, &value)) in raws.iter().zip(&values).enumerate() {
        let status = if value == 0.0 {
            EntryStatus::Missing
        } else if present.len() >= 3 && ((value - median) / median).abs() > SUSPECT_DEVIATION {
            EntryStatus::Suspect
        } else {
            EntryStatus::Ok
        };
        out.push(ReferenceEntry { table, row, case: case.clone(), column: table.columns()[k], raw, value, status });
    }
}

/// Every embedded reference value.
pub fn reference_entries() -> &'static [ReferenceEntry] {
    static ENTRIES: OnceLock<Vec<ReferenceEntry>> = OnceLock::new();
    ENTRIES.get_or_init(|| {
        let mut out = Vec::new();
        for (row, (xi, raws)) in CUTOUT_FREQUENCY.iter().enumerate() {
            let case = Case::new("SSSS", num(xi), 0.0);
            push_row(&mut out, RefTable::CutoutFrequency, row, case, raws);
        }
        for (row, (edges, raw)) in CUTOUT_EDGES.iter().enumerate() {
            let case = Case::new(edges, 0.4, 0.0);
            push_row(&mut out, RefTable::CutoutEdges, row, case, &[raw]);
        }
        for (row, (xi, theta, raws)) in SKEW_SIMPLY_SUPPORTED.iter().enumerate() {
            let case = Case::new("SSSS", num(xi), num(theta));
            push_row(&mut out, RefTable::SkewSimplySupported, row, case, raws);
        }
        for (row, (theta, raws)) in SKEW_CLAMPED.iter().enumerate() {
            let case = Case::new("CCCC", 1.0, num(theta));
            push_row(&mut out, RefTable::SkewClamped, row, case, raws);
        }
        out
    })
}

/// Looks up one published value. Missing and suspect entries are errors.
pub fn reference_lookup(table: RefTable, case: &Case, column: &str) -> Result<&'static ReferenceEntry> {
    let e = reference_entries()
        .iter()
        .find(|e| e.table == table && e.column == column && e.case.matches(case))
        .ok_or_else(|| {
            Error::UnknownCase(format!(
                "{} has no row {}/{}/{}° in column {column}",
                table.name(),
                case.edges,
                case.ratio,
                case.angle_deg
            ))
        })?;
    match e.status {
        EntryStatus::Ok => Ok(e),
        EntryStatus::Missing => {
            Err(Error::UnknownCase(format!("{} {column} for {case:?} was not reported", table.name())))
        }
        EntryStatus::Suspect => Err(Error::UnknownCase(format!(
            "{} {column} for {case:?} is flagged as inconsistent ({})",
            table.name(),
            e.raw
        ))),
    }
}

/// Finds the default-column entry of any table that matches `case`.
pub fn reference_for(tables: &[RefTable], case: &Case) -> Option<&'static ReferenceEntry> {
    tables.iter().find_map(|&t| reference_lookup(t, case, t.default_column()).ok())
}

/// Writes all entries as CSV.
pub fn write_reference_csv<W: Write>(mut w: W) -> Result<()> {
    writeln!(w, "table,row,edges,ratio,angle_deg,column,raw,value,status")?;
    for e in reference_entries() {
        let status = match e.status {
            EntryStatus::Ok => "ok",
            EntryStatus::Missing => "missing",
            EntryStatus::Suspect => "suspect",
        };
        writeln!(
            w,
            "{},{},{},{},{},{},\"{}\",{},{}",
            e.table.name(),
            e.row,
            e.case.edges,
            e.case.ratio,
            e.case.angle_deg,
            e.column,
            e.raw,
            e.value,
            status
        )?;
    }
    Ok(())
}

/// Encoder widths of the activation stability study with the published
/// relative errors for plain and scaled tanh. `"NaN"` marks a diverged run.
pub const ACTIVATION_STUDY: [(&[usize], &str, &str); 18] = [
    (&[30], "0,0063740", "0,0060618"),
    (&[40], "NaN", "0,0058869"),
    (&[50], "0,0130702", "0,0090355"),
    (&[60], "0,0077438", "0,0104713"),
    (&[30, 10], "0,0083107", "0,0070922"),
    (&[40, 10], "0,0082238", "0,0066074"),
    (&[50, 10], "0,0061002", "0,0082771"),
    (&[60, 10], "0,0075465", "0,0058044"),
    (&[30, 20], "0,0075115", "0,0078926"),
    (&[40, 20], "0,0087727", "0,0086784"),
    (&[50, 20], "NaN", "0,0055310"),
    (&[60, 20], "NaN", "0,0084229"),
    (&[30, 20, 10], "0,0083553", "0,0069302"),
    (&[50, 30, 10], "0,0121318", "0,0077830"),
    (&[60, 30, 10], "0,0102968", "0,0053692"),
    (&[40, 30, 20], "0,0075632", "0,0075470"),
    (&[50, 30, 20], "0,0067328", "0,0065867"),
    (&[60, 30, 20], "NaN", "0,0060054"),
];
