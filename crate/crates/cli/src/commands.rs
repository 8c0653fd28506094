//! Subcommands. Each one renders its whole output before anything is
//! written, so failures never leave partial tables behind.

use std::str::FromStr;

use chamberflow::coding::apply_map;
use chamberflow::flow::{default_horizon, first_return, flat_from_words};
use chamberflow::spectral::{
    bowen_dimension_with, euler_zeta, kronecker_det, product_det_scan, zero_scan, Axis, ProductGrid, ScanGrid, ZeroRecord,
    DEFAULT_COVER_DEPTH,
};
use chamberflow::transfer::{
    assemble_factor_operator, assemble_product_operator, eigenvalues, fredholm_det, leading_eigenvalue, periodic_trace,
    CollocationBasis, MultiParameter,
};
use chamberflow::{BoundaryPoint, ProductGroup, SchottkyFactor, Word};
use clap::{Args, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::Config;
use crate::format::{complex_cells, g17, indexed, Table};

/// Exit status of a failed run, with its diagnostic.
#[derive(Clone, Debug, PartialEq)]
pub enum Failure {
    /// Invalid group data or a failed check of it (exit 1).
    Validation(String),
    /// A numerical method did not converge or a check exceeded its tolerance (exit 2).
    Numerical(String),
    /// Malformed arguments or configuration (exit 3).
    Usage(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Usage(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) | Failure::Usage(m) => m,
        }
    }
}

impl From<chamberflow::Error> for Failure {
    fn from(e: chamberflow::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

/// Rendered data and the exit code to report with it.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub data: String,
    pub exit_code: i32,
}

impl Output {
    fn ok(data: String) -> Self {
        Output { data, exit_code: 0 }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the pairing maps of every factor.
    ///
    /// Columns: factor,q,pairing_defect,inverse_defect,min_gap,exterior_to_interior,passed
    Validate(ValidateArgs),
    /// Depth-n cover intervals of the limit set of one factor.
    ///
    /// Columns: word,left,right
    LimitCover(LimitCoverArgs),
    /// Bowen parameter of one factor from two independent computations.
    ///
    /// Columns: factor,delta,residual,cover_delta,cover_increment,oracle_gap,det_at_delta,degree,cover_depth,iterations
    Dimension(DimensionArgs),
    /// Fredholm determinant det(I − M_s), optionally with the Euler product.
    ///
    /// Columns: s_re,s_im,det_re,det_im[,euler_re,euler_im,difference,tail_estimate,classes]
    Zeta(ZetaArgs),
    /// Compare tr(M_s^n) with the periodic-orbit sum.
    ///
    /// Columns: s,n,matrix_trace_re,matrix_trace_im,orbit_trace_re,orbit_trace_im,difference
    TraceCheck(TraceCheckArgs),
    /// Follow a compact flat through successive returns to the cross section.
    ///
    /// Columns: step,t0_1..t0_r,letter_1..letter_r,map_letter_1..map_letter_r,deviation,nu_1..nu_r
    FlowSim(FlowSimArgs),
    /// Dense determinant of the multi-parameter operator with its Kronecker value.
    ///
    /// Columns: s_1..s_r,det_re,det_im,kronecker_re,kronecker_im,relative_error,dim
    ProductDet(ProductDetArgs),
    /// Determinant tables on real grids, or zero searches for one factor.
    ///
    /// Tables: s_1..s_r,det_re,det_im,leading. Zeros: factor,re,im,residual,degree,iterations
    Scan(ScanArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Print the canonical re-serialization of the config instead of the report.
    #[arg(long)]
    pub canonical: bool,
    /// Boundary samples per circle.
    #[arg(long, default_value_t = 256)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct LimitCoverArgs {
    #[arg(long, default_value_t = 1)]
    pub factor: usize,
    #[arg(long)]
    pub depth: usize,
}

#[derive(Debug, Args)]
pub struct DimensionArgs {
    #[arg(long, default_value_t = 1)]
    pub factor: usize,
    /// Root tolerance; defaults to the config tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_COVER_DEPTH)]
    pub cover_depth: usize,
}

#[derive(Debug, Args)]
pub struct ZetaArgs {
    #[arg(long, default_value_t = 1)]
    pub factor: usize,
    /// Spectral parameter as RE or RE,IM.
    #[arg(long, allow_hyphen_values = true)]
    pub s: String,
    /// Also evaluate the truncated Euler product.
    #[arg(long)]
    pub euler: bool,
    #[arg(long)]
    pub degree: Option<usize>,
    /// Longest primitive word in the Euler product.
    #[arg(long, default_value_t = 12)]
    pub words: usize,
    /// Largest k in the inner product over (s + k).
    #[arg(long, default_value_t = 30)]
    pub kmax: usize,
}

#[derive(Debug, Args)]
pub struct TraceCheckArgs {
    #[arg(long, default_value_t = 1)]
    pub factor: usize,
    /// Largest orbit length n.
    #[arg(long = "n")]
    pub n_orbit: usize,
    #[arg(long)]
    pub degree: Option<usize>,
    /// Comma-separated real parameters.
    #[arg(long, default_value = "0.5,1.0")]
    pub s: String,
    /// Largest accepted difference; larger ones exit with status 2.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct FlowSimArgs {
    /// One closed word per factor: factors separated by ';', letters by ','.
    #[arg(long, allow_hyphen_values = true)]
    pub words: String,
    #[arg(long)]
    pub steps: usize,
    /// Search horizon for crossings; defaults to ten times the longest period.
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ProductDetArgs {
    /// One real parameter per factor, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub s: String,
    /// Degree per factor; defaults to the config's product degree.
    #[arg(long)]
    pub degree: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Real axis FACTOR:START:STOP:COUNT; one per factor for tables.
    #[arg(long = "axis", allow_hyphen_values = true)]
    pub axes: Vec<String>,
    /// Diagonal slice START:STOP:COUNT with all parameters equal.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "axes")]
    pub diagonal: Option<String>,
    /// Report zeros along the (single) real axis instead of a table.
    #[arg(long)]
    pub zeros: bool,
    /// Complex zero search RE0:RE1:IM0:IM1:RESOLUTION for --factor.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["axes", "diagonal"])]
    pub complex: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub factor: usize,
    #[arg(long)]
    pub degree: Option<usize>,
}

pub fn run(command: &Command, config: &Config) -> Result<Output, Failure> {
    // Semantic checks of the group data happen here, not in the parser.
    let group = config.group().map_err(|e| Failure::Validation(format!("invalid group: {e}")))?;
    match command {
        Command::Validate(a) => validate(config, &group, a),
        Command::LimitCover(a) => limit_cover(&group, a),
        Command::Dimension(a) => dimension(config, &group, a),
        Command::Zeta(a) => zeta(config, &group, a),
        Command::TraceCheck(a) => trace_check(config, &group, a),
        Command::FlowSim(a) => flow_sim(&group, a),
        Command::ProductDet(a) => product_det(config, &group, a),
        Command::Scan(a) => scan(config, &group, a),
    }
}

fn factor(group: &ProductGroup, j: usize) -> Result<&SchottkyFactor, Failure> {
    if j == 0 || j > group.rank() {
        return Err(Failure::Usage(format!("factor {j} out of range 1..={}", group.rank())));
    }
    Ok(group.factor(j - 1))
}

fn parse_list<T: FromStr>(text: &str, sep: char, what: &str) -> Result<Vec<T>, Failure> {
    text.split(sep)
        .map(|p| p.trim().parse::<T>().map_err(|_| Failure::Usage(format!("invalid {what} '{p}' in '{text}'"))))
        .collect()
}

fn basis(f: &SchottkyFactor, degree: usize) -> Result<CollocationBasis, Failure> {
    Ok(CollocationBasis::new(f, degree, 1.0)?)
}

fn validate(config: &Config, group: &ProductGroup, a: &ValidateArgs) -> Result<Output, Failure> {
    let reports: Vec<_> = group.factors().iter().map(|f| f.validate(a.samples)).collect();
    let passed = reports.iter().all(|r| r.passed);
    let data = if a.canonical {
        config.canonical()
    } else {
        let mut t =
            Table::new(&["factor", "q", "pairing_defect", "inverse_defect", "min_gap", "exterior_to_interior", "passed"]);
        for (j, (f, r)) in group.factors().iter().zip(&reports).enumerate() {
            t.push(vec![
                (j + 1).to_string(),
                f.q().to_string(),
                g17(r.pairing_defect),
                g17(r.inverse_defect),
                g17(r.min_gap),
                r.exterior_to_interior.to_string(),
                r.passed.to_string(),
            ]);
        }
        t.finish()
    };
    Ok(Output { data, exit_code: if passed { 0 } else { 1 } })
}

fn limit_cover(group: &ProductGroup, a: &LimitCoverArgs) -> Result<Output, Failure> {
    let f = factor(group, a.factor)?;
    let mut t = Table::new(&["word", "left", "right"]);
    for (w, (lo, hi)) in f.limit_cover(a.depth)? {
        t.push(vec![w.to_string(), g17(lo), g17(hi)]);
    }
    Ok(Output::ok(t.finish()))
}

fn dimension(config: &Config, group: &ProductGroup, a: &DimensionArgs) -> Result<Output, Failure> {
    let f = factor(group, a.factor)?;
    let degree = a.degree.unwrap_or(config.defaults.degree);
    let b = bowen_dimension_with(f, a.tol.unwrap_or(config.defaults.tolerance), degree, a.cover_depth)?;
    let det = fredholm_det(&assemble_factor_operator(f, Complex64::new(b.delta, 0.0), &basis(f, degree)?)?)?;
    let mut t = Table::new(&[
        "factor",
        "delta",
        "residual",
        "cover_delta",
        "cover_increment",
        "oracle_gap",
        "det_at_delta",
        "degree",
        "cover_depth",
        "iterations",
    ]);
    t.push(vec![
        a.factor.to_string(),
        g17(b.delta),
        g17(b.residual),
        g17(b.cover_delta),
        g17(b.cover_increment),
        g17(b.oracle_gap()),
        g17(det.value.re),
        b.degree.to_string(),
        b.cover_depth.to_string(),
        b.iterations.to_string(),
    ]);
    Ok(Output::ok(t.finish()))
}

fn parse_complex(text: &str) -> Result<Complex64, Failure> {
    match parse_list::<f64>(text, ',', "number")?.as_slice() {
        [re] => Ok(Complex64::new(*re, 0.0)),
        [re, im] => Ok(Complex64::new(*re, *im)),
        _ => Err(Failure::Usage(format!("expected RE or RE,IM, got '{text}'"))),
    }
}

fn zeta(config: &Config, group: &ProductGroup, a: &ZetaArgs) -> Result<Output, Failure> {
    let f = factor(group, a.factor)?;
    let s = parse_complex(&a.s)?;
    let det = fredholm_det(&assemble_factor_operator(f, s, &basis(f, a.degree.unwrap_or(config.defaults.degree))?)?)?;
    let mut header = vec!["s_re", "s_im", "det_re", "det_im"];
    let mut row: Vec<String> = complex_cells(s).into_iter().chain(complex_cells(det.value)).collect();
    if a.euler {
        let e = euler_zeta(f, s, a.words, a.kmax)?;
        header.extend(["euler_re", "euler_im", "difference", "tail_estimate", "classes"]);
        row.extend(complex_cells(e.value));
        row.extend([g17((e.value - det.value).norm()), g17(e.tail_estimate), e.classes.to_string()]);
    }
    let mut t = Table::new(&header);
    t.push(row);
    Ok(Output::ok(t.finish()))
}

fn trace_check(config: &Config, group: &ProductGroup, a: &TraceCheckArgs) -> Result<Output, Failure> {
    let f = factor(group, a.factor)?;
    if a.n_orbit == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    let b = basis(f, a.degree.unwrap_or(config.defaults.degree))?;
    let mut t = Table::new(&["s", "n", "matrix_trace_re", "matrix_trace_im", "orbit_trace_re", "orbit_trace_im", "difference"]);
    let mut worst = 0.0f64;
    for s in parse_list::<f64>(&a.s, ',', "parameter")? {
        let m = assemble_factor_operator(f, Complex64::new(s, 0.0), &b)?;
        for n in 1..=a.n_orbit {
            let matrix = m.power_trace(n);
            let orbit = periodic_trace(f, Complex64::new(s, 0.0), n)?;
            let diff = (matrix - orbit).norm();
            worst = worst.max(diff);
            let mut row = vec![g17(s), n.to_string()];
            row.extend(complex_cells(matrix));
            row.extend(complex_cells(orbit));
            row.push(g17(diff));
            t.push(row);
        }
    }
    let data = t.finish();
    if !(worst <= a.tol) {
        return Err(Failure::Numerical(format!("trace difference {worst:e} exceeds {:e}\n{data}", a.tol)));
    }
    Ok(Output::ok(data))
}

/// Parses `"1,2;2,1"` into one closed word per factor.
pub fn parse_words(text: &str) -> Result<Vec<Word>, Failure> {
    text.split(';')
        .map(|part| {
            let letters = parse_list::<i32>(part, ',', "letter")?;
            Word::new(letters, true).map_err(|e| Failure::Usage(format!("word '{part}': {e}")))
        })
        .collect()
}

fn boundary_cell(x: BoundaryPoint) -> String {
    match x.finite() {
        Some(v) => g17(v),
        None => "inf".into(),
    }
}

fn flow_sim(group: &ProductGroup, a: &FlowSimArgs) -> Result<Output, Failure> {
    let words = parse_words(&a.words)?;
    if words.len() != group.rank() {
        return Err(Failure::Usage(format!("{} words for {} factors", words.len(), group.rank())));
    }
    let r = group.rank();
    let horizon = match a.horizon {
        Some(h) => h,
        None => default_horizon(group, &words)?,
    };
    let mut state = flat_from_words(group, &words)?;
    let header: Vec<String> = std::iter::once("step".to_string())
        .chain(indexed("t0", r))
        .chain(indexed("letter", r))
        .chain(indexed("map_letter", r))
        .chain(std::iter::once("deviation".to_string()))
        .chain(indexed("nu", r))
        .collect();
    let mut t = Table::new(&header);
    for step in 1..=a.steps {
        let (map_letter, image) = apply_map(group, &state.forward())?;
        let ret = first_return(group, &state, horizon)?;
        let nu = ret.next.forward();
        let mut row = vec![step.to_string()];
        row.extend(ret.t0.iter().map(|&x| g17(x)));
        row.extend(ret.letter.iter().map(|l| l.to_string()));
        row.extend(map_letter.iter().map(|l| l.to_string()));
        row.push(g17(nu.chordal_distance(&image)));
        row.extend(nu.0.iter().map(|&x| boundary_cell(x)));
        t.push(row);
        state = ret.next;
    }
    Ok(Output::ok(t.finish()))
}

fn product_det(config: &Config, group: &ProductGroup, a: &ProductDetArgs) -> Result<Output, Failure> {
    let s = parse_list::<f64>(&a.s, ',', "parameter")?;
    if s.len() != group.rank() {
        return Err(Failure::Usage(format!("{} parameters for {} factors", s.len(), group.rank())));
    }
    let degree = a.degree.unwrap_or(config.defaults.product_degree);
    let bases = group.factors().iter().map(|f| basis(f, degree)).collect::<Result<Vec<_>, _>>()?;
    let dense = assemble_product_operator(group, &MultiParameter::real(&s), &bases)?;
    let det = fredholm_det(&dense)?.value;
    let spectra = group
        .factors()
        .iter()
        .zip(&bases)
        .zip(&s)
        .map(|((f, b), &sj)| Ok(eigenvalues(assemble_factor_operator(f, Complex64::new(sj, 0.0), b)?.matrix())))
        .collect::<Result<Vec<_>, Failure>>()?;
    let refs: Vec<&[Complex64]> = spectra.iter().map(|v| v.as_slice()).collect();
    let kron = kronecker_det(&refs);
    let header: Vec<String> = indexed("s", s.len())
        .into_iter()
        .chain(["det_re", "det_im", "kronecker_re", "kronecker_im", "relative_error", "dim"].map(String::from))
        .collect();
    let mut t = Table::new(&header);
    let mut row: Vec<String> = s.iter().map(|&x| g17(x)).collect();
    row.extend(complex_cells(det));
    row.extend(complex_cells(kron));
    row.push(g17((det - kron).norm() / det.norm().max(kron.norm()).max(f64::MIN_POSITIVE)));
    row.push(dense.dim().to_string());
    t.push(row);
    Ok(Output::ok(t.finish()))
}

/// Parses `START:STOP:COUNT`.
fn parse_axis(text: &str) -> Result<Axis, Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, count] = parts.as_slice() else {
        return Err(Failure::Usage(format!("expected START:STOP:COUNT, got '{text}'")));
    };
    let num = |p: &str| p.parse::<f64>().map_err(|_| Failure::Usage(format!("invalid number '{p}' in '{text}'")));
    let count = count.parse::<usize>().map_err(|_| Failure::Usage(format!("invalid count '{count}' in '{text}'")))?;
    Ok(Axis::new(num(start)?, num(stop)?, count)?)
}

/// Parses `FACTOR:START:STOP:COUNT`.
fn parse_factor_axis(text: &str) -> Result<(usize, Axis), Failure> {
    let (j, rest) = text.split_once(':').ok_or_else(|| Failure::Usage(format!("expected FACTOR:START:STOP:COUNT, got '{text}'")))?;
    let j = j.parse::<usize>().map_err(|_| Failure::Usage(format!("invalid factor '{j}' in '{text}'")))?;
    Ok((j, parse_axis(rest)?))
}

fn zero_table(factor: usize, zeros: &[ZeroRecord]) -> String {
    let mut t = Table::new(&["factor", "re", "im", "residual", "degree", "iterations"]);
    for z in zeros {
        let mut row = vec![factor.to_string()];
        row.extend(complex_cells(z.location));
        row.extend([g17(z.residual), z.degree.to_string(), z.iterations.to_string()]);
        t.push(row);
    }
    t.finish()
}

fn scan(config: &Config, group: &ProductGroup, a: &ScanArgs) -> Result<Output, Failure> {
    let degree = a.degree.unwrap_or(config.defaults.degree);
    if let Some(window) = &a.complex {
        let parts: Vec<&str> = window.split(':').collect();
        let [re0, re1, im0, im1, res] = parts.as_slice() else {
            return Err(Failure::Usage(format!("expected RE0:RE1:IM0:IM1:RESOLUTION, got '{window}'")));
        };
        let num = |p: &str| p.parse::<f64>().map_err(|_| Failure::Usage(format!("invalid number '{p}' in '{window}'")));
        let resolution = res.parse::<usize>().map_err(|_| Failure::Usage(format!("invalid resolution '{res}'")))?;
        let f = factor(group, a.factor)?;
        let grid = ScanGrid::Complex { re: (num(re0)?, num(re1)?), im: (num(im0)?, num(im1)?), resolution };
        let zeros = zero_scan(f, grid, &basis(f, degree)?)?;
        return Ok(Output::ok(zero_table(a.factor, &zeros)));
    }

    let axes = a.axes.iter().map(|s| parse_factor_axis(s)).collect::<Result<Vec<_>, _>>()?;
    if a.zeros {
        let [(j, axis)] = axes.as_slice() else {
            return Err(Failure::Usage("--zeros takes exactly one --axis".into()));
        };
        let f = factor(group, *j)?;
        let zeros = zero_scan(f, ScanGrid::Real(*axis), &basis(f, degree)?)?;
        return Ok(Output::ok(zero_table(*j, &zeros)));
    }

    let r = group.rank();
    let grid = match &a.diagonal {
        Some(d) => ProductGrid::Diagonal(parse_axis(d)?),
        None => {
            let mut ordered = vec![None; r];
            for (j, axis) in &axes {
                factor(group, *j)?;
                if ordered[j - 1].replace(*axis).is_some() {
                    return Err(Failure::Usage(format!("axis for factor {j} given twice")));
                }
            }
            let axes: Option<Vec<Axis>> = ordered.into_iter().collect();
            ProductGrid::Tensor(axes.ok_or_else(|| Failure::Usage(format!("need one --axis per factor (rank {r})")))?)
        }
    };
    let bases = group.factors().iter().map(|f| basis(f, degree)).collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(&indexed("s", r).into_iter().chain(["det_re", "det_im", "leading"].map(String::from)).collect::<Vec<_>>());
    if r == 1 {
        let f = group.factor(0);
        let rows = grid
            .points(1)?
            .into_par_iter()
            .map(|p| {
                let m = assemble_factor_operator(f, Complex64::new(p[0], 0.0), &bases[0])?;
                Ok((p[0], fredholm_det(&m)?.value, leading_eigenvalue(f, p[0], &bases[0])?))
            })
            .collect::<Result<Vec<_>, chamberflow::Error>>()?;
        for (s, det, lead) in rows {
            let mut row = vec![g17(s)];
            row.extend(complex_cells(det));
            row.push(g17(lead));
            t.push(row);
        }
        return Ok(Output::ok(t.finish()));
    }
    let scan = product_det_scan(group, &grid, &bases)?;
    for row in &scan.rows {
        let mut cells: Vec<String> = row.s.iter().map(|&x| g17(x)).collect();
        cells.extend(complex_cells(row.det));
        cells.push(g17(row.leading));
        t.push(cells);
    }
    let worst = scan.checks.iter().map(|c| c.relative_error).fold(0.0, f64::max);
    for c in &scan.checks {
        let s: Vec<String> = c.s.iter().map(|&x| g17(x)).collect();
        eprintln!("cross-check at s = ({}), degree {:?}: relative error {:e}", s.join(", "), c.degree, c.relative_error);
    }
    if !(worst <= 1e-9) {
        return Err(Failure::Numerical(format!("dense and spectral determinants differ by {worst:e}")));
    }
    Ok(Output::ok(t.finish()))
}
