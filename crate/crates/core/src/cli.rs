//! The `cmj` command line.
//!
//! Every subcommand writes a report to `out` and diagnostics to `err`. CSV
//! output starts with a `# schema=1 ...` comment line; JSON-lines output
//! starts with an equivalent header record. Stochastic commands name the
//! master seed and the replicate stream rule in that header, and rows are
//! always written in replicate order.
//!
//! Exit status: 0 on success, 1 when a verification fails, 2 on a usage or
//! input error.

use std::ffi::OsString;
use std::io::{self, Write};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::atlas::{verify_change_of_measure_capped, verify_martingale_mean_capped, DEFAULT_MAX_ENTRIES};
use crate::characteristics::{growth_ratio_estimate, Characteristic};
use crate::law::{load_law, ReproductionLaw};
use crate::malthus::{check_nonperiodicity, solve_malthusian, DEFAULT_TOL};
use crate::moments::{classify_xlogx, MomentValue, TailFamily};
use crate::replicate::{run_replicates, STREAM_RULE};
use crate::spine::build_spine_law;
use crate::stats::mean_and_standard_error;
use crate::tree::{grow_spined_tree_capped, grow_stopped_tree_capped, DEFAULT_MAX_VERTICES};

pub const SCHEMA: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cmj", version, about = "Discrete-time branching populations as random trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct LawArgs {
    /// Law file, or `builtin:NAME` for LAW-A, LAW-B, LAW-D, LAW-E
    #[arg(long)]
    pub law: String,
    #[arg(long, value_enum, default_value = "csv")]
    pub out: OutputFormat,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub law: LawArgs,
    #[arg(long)]
    pub levels: u32,
    #[arg(long, default_value_t = 1000)]
    pub reps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-tree vertex budget
    #[arg(long, default_value_t = DEFAULT_MAX_VERTICES)]
    pub max_vertices: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyName {
    DelayedPower,
    DelayedZeta2,
    DelayedZeta2Log,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Malthusian parameter, mean age at childbearing, criticality, period
    Malthus {
        #[command(flatten)]
        law: LawArgs,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Size-biased law of the immortal line
    SpineLaw {
        #[command(flatten)]
        law: LawArgs,
    },
    /// Sample stopped trees
    Simulate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Sample stopped trees with a distinguished immortal line
    Spine {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Exact checks on enumerated trees, levels 1 through N
    Verify {
        #[command(flatten)]
        law: LawArgs,
        #[arg(long)]
        levels: u32,
        /// Check the size-biased tree law instead of the martingale
        #[arg(long)]
        spine: bool,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ENTRIES)]
        max_entries: usize,
    },
    /// Growth factors and ratios of population sums over replicates
    Growth {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated: ever-born, newborn, alive:L
        #[arg(long, value_delimiter = ',', default_value = "ever-born,newborn")]
        chi: Vec<String>,
    },
    /// Moment conditions for a law or a heavy-tailed delayed family
    Xlogx {
        #[arg(long, conflicts_with = "family", required_unless_present = "family")]
        law: Option<String>,
        #[arg(long, value_enum)]
        family: Option<FamilyName>,
        /// Tail exponent of delayed-power
        #[arg(long, default_value_t = 2.0)]
        s: f64,
        /// First litter size of delayed-power
        #[arg(long, default_value_t = 1)]
        k0: u64,
        /// Log exponent of delayed-zeta2-log
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, value_enum, default_value = "csv")]
        out: OutputFormat,
    },
}

/// Parses `args` (without the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv = std::iter::once(OsString::from("cmj")).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(Failure::Input(message)) => {
            let _ = writeln!(err, "error: {message}");
            EXIT_USAGE
        }
        Err(Failure::Io(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

enum Failure {
    Input(String),
    Io(io::Error),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

fn input<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Malthus { law, tol } => malthus(&law, tol, out),
        Command::SpineLaw { law } => spine_law(&law, out),
        Command::Simulate { run } => simulate(&run, out),
        Command::Spine { run } => spine(&run, out),
        Command::Verify {
            law,
            levels,
            spine,
            tol,
            max_entries,
        } => verify(&law, levels, spine, tol, max_entries, out),
        Command::Growth { run, chi } => growth(&run, &chi, out),
        Command::Xlogx {
            law,
            family,
            s,
            k0,
            q,
            out: format,
        } => xlogx(law.as_deref(), family, s, k0, q, format, out),
    }
}

#[derive(Debug, Clone)]
enum Field {
    Int(u64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Field {
    fn csv(&self) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::Float(v) => v.to_string(),
            Field::Text(v) if v.contains([',', '"']) => format!("\"{}\"", v.replace('"', "\"\"")),
            Field::Text(v) => v.clone(),
            Field::Bool(v) => v.to_string(),
            Field::Empty => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::Float(v) => serde_json::to_string(v).expect("floats serialize"),
            Field::Text(v) => serde_json::to_string(v).expect("strings serialize"),
            Field::Bool(v) => v.to_string(),
            Field::Empty => "null".into(),
        }
    }
}

fn text(s: impl Into<String>) -> Field {
    Field::Text(s.into())
}

fn opt_float(v: Option<f64>) -> Field {
    v.map_or(Field::Empty, Field::Float)
}

/// Writes a header and rows in the chosen format.
struct Table<'a> {
    out: &'a mut dyn Write,
    format: OutputFormat,
    columns: Vec<String>,
}

impl<'a> Table<'a> {
    fn new(
        out: &'a mut dyn Write,
        format: OutputFormat,
        meta: &[(&str, Field)],
        columns: Vec<String>,
    ) -> io::Result<Self> {
        match format {
            OutputFormat::Csv => {
                let mut line = format!("# schema={SCHEMA}");
                for (k, v) in meta {
                    line.push_str(&format!(" {k}={}", v.csv()));
                }
                writeln!(out, "{line}")?;
                writeln!(out, "{}", columns.join(","))?;
            }
            OutputFormat::Jsonl => {
                let mut fields = vec![("schema".to_string(), Field::Int(u64::from(SCHEMA)))];
                fields.extend(meta.iter().map(|(k, v)| (k.to_string(), v.clone())));
                write_json(out, &fields)?;
            }
        }
        Ok(Self { out, format, columns })
    }

    fn row(&mut self, values: Vec<Field>) -> io::Result<()> {
        debug_assert_eq!(values.len(), self.columns.len());
        match self.format {
            OutputFormat::Csv => {
                let cells: Vec<String> = values.iter().map(Field::csv).collect();
                writeln!(self.out, "{}", cells.join(","))
            }
            OutputFormat::Jsonl => {
                let fields: Vec<(String, Field)> = self.columns.iter().cloned().zip(values).collect();
                write_json(self.out, &fields)
            }
        }
    }

    /// Trailing summary: comment lines in CSV, one record in JSON lines.
    fn summary(&mut self, fields: &[(String, Field)]) -> io::Result<()> {
        match self.format {
            OutputFormat::Csv => {
                for (k, v) in fields {
                    writeln!(self.out, "# {k}={}", v.csv())?;
                }
                Ok(())
            }
            OutputFormat::Jsonl => {
                let mut all = vec![("summary".to_string(), Field::Bool(true))];
                all.extend(fields.iter().cloned());
                write_json(self.out, &all)
            }
        }
    }
}

fn write_json(out: &mut dyn Write, fields: &[(String, Field)]) -> io::Result<()> {
    let body: Vec<String> = fields
        .iter()
        .map(|(k, v)| format!("{}:{}", serde_json::to_string(k).expect("keys serialize"), v.json()))
        .collect();
    writeln!(out, "{{{}}}", body.join(","))
}

fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn load(args: &LawArgs) -> Result<ReproductionLaw, Failure> {
    load_law(&args.law).map_err(|e| Failure::Input(format!("{}: {e}", args.law)))
}

fn stochastic_meta(args: &RunArgs) -> Vec<(&'static str, Field)> {
    vec![
        ("law", text(args.law.law.clone())),
        ("levels", Field::Int(u64::from(args.levels))),
        ("reps", Field::Int(args.reps)),
        ("seed", Field::Int(args.seed)),
        ("streams", text(STREAM_RULE)),
    ]
}

fn malthus(args: &LawArgs, tol: f64, out: &mut dyn Write) -> Result<i32, Failure> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Failure::Input(format!("--tol must be positive, got {tol}")));
    }
    let law = load(args)?;
    let sol = solve_malthusian(&law, tol).map_err(input)?;
    let mut t = Table::new(
        out,
        args.out,
        &[("law", text(args.law.clone()))],
        columns(&["alpha", "beta", "criticality", "period", "residual"]),
    )?;
    t.row(vec![
        Field::Float(sol.alpha),
        Field::Float(sol.beta),
        text(sol.criticality.to_string()),
        Field::Int(u64::from(check_nonperiodicity(&law))),
        Field::Float(sol.residual),
    ])?;
    Ok(EXIT_OK)
}

fn ages_text(ages: &[u32]) -> String {
    ages.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

fn spine_law(args: &LawArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let law = load(args)?;
    let alpha = solve_malthusian(&law, DEFAULT_TOL).map_err(input)?.alpha;
    let sl = build_spine_law(&law, alpha).map_err(input)?;
    let mut t = Table::new(
        out,
        args.out,
        &[("law", text(args.law.clone())), ("alpha", Field::Float(alpha))],
        columns(&["section", "ages", "k", "j", "n", "mass"]),
    )?;
    for e in sl.table() {
        let ages = sl.ages_of(e);
        t.row(vec![
            text("table"),
            text(ages_text(ages)),
            Field::Int(ages.len() as u64),
            Field::Int(e.rank as u64),
            Field::Empty,
            Field::Float(e.mass),
        ])?;
    }
    for (k, p) in sl.offspring_marginal().into_iter().enumerate().filter(|(_, p)| *p > 0.0) {
        t.row(vec![text("offspring"), Field::Empty, Field::Int(k as u64), Field::Empty, Field::Empty, Field::Float(p)])?;
    }
    for (j, p) in sl.rank_marginal().into_iter().enumerate().skip(1) {
        t.row(vec![text("rank"), Field::Empty, Field::Empty, Field::Int(j as u64), Field::Empty, Field::Float(p)])?;
    }
    for (&n, &p) in sl.regeneration_pmf() {
        t.row(vec![text("regeneration"), Field::Empty, Field::Empty, Field::Empty, Field::Int(u64::from(n)), Field::Float(p)])?;
    }
    Ok(EXIT_OK)
}

struct TreeRow {
    martingale: f64,
    coming: usize,
    births: usize,
    extinct: bool,
    spine: Option<(usize, String, String)>,
}

fn simulate(args: &RunArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let law = load(&args.law)?;
    let alpha = solve_malthusian(&law, DEFAULT_TOL).map_err(input)?.alpha;
    let rows = run_replicates(args.reps, args.seed, |_, rng| {
        grow_stopped_tree_capped(&law, args.levels, args.max_vertices, rng).map(|t| TreeRow {
            martingale: t.nerman_martingale(alpha),
            coming: t.coming_generation_size(),
            births: t.total_births(),
            extinct: t.is_extinct(),
            spine: None,
        })
    });
    write_tree_rows(args, alpha, rows, out)
}

fn spine(args: &RunArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let law = load(&args.law)?;
    let alpha = solve_malthusian(&law, DEFAULT_TOL).map_err(input)?.alpha;
    let sl = build_spine_law(&law, alpha).map_err(input)?;
    let rows = run_replicates(args.reps, args.seed, |_, rng| {
        grow_spined_tree_capped(&sl, args.levels, args.max_vertices, rng).map(|st| {
            let t = st.tree();
            let increments = st.spine_increments().iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
            TreeRow {
                martingale: t.nerman_martingale(alpha),
                coming: t.coming_generation_size(),
                births: t.total_births(),
                extinct: t.is_extinct(),
                spine: Some((st.spine_generation(), st.immortal_stub().to_string(), increments)),
            }
        })
    });
    write_tree_rows(args, alpha, rows, out)
}

fn write_tree_rows(
    args: &RunArgs,
    alpha: f64,
    rows: Vec<Result<TreeRow, crate::tree::TreeError>>,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>().map_err(input)?;
    let spined = rows.first().is_some_and(|r| r.spine.is_some());
    let mut names = vec!["replicate", "level", "martingale", "coming_generation", "total_births", "extinct"];
    if spined {
        names.extend(["spine_generation", "immortal", "spine_increments"]);
    }
    let mut meta = stochastic_meta(args);
    meta.push(("alpha", Field::Float(alpha)));
    let mut t = Table::new(out, args.law.out, &meta, columns(&names))?;
    for (i, r) in rows.iter().enumerate() {
        let mut values = vec![
            Field::Int(i as u64),
            Field::Int(u64::from(args.levels)),
            Field::Float(r.martingale),
            Field::Int(r.coming as u64),
            Field::Int(r.births as u64),
            Field::Bool(r.extinct),
        ];
        if let Some((generation, immortal, increments)) = &r.spine {
            values.extend([Field::Int(*generation as u64), text(immortal.clone()), text(increments.clone())]);
        }
        t.row(values)?;
    }
    if rows.len() >= 2 {
        let values: Vec<f64> = rows.iter().map(|r| r.martingale).collect();
        let (mean, se) = mean_and_standard_error(&values);
        let extinct = rows.iter().filter(|r| r.extinct).count();
        t.summary(&[
            ("mean_martingale".into(), Field::Float(mean)),
            ("standard_error".into(), Field::Float(se)),
            ("extinct".into(), Field::Int(extinct as u64)),
        ])?;
    }
    Ok(EXIT_OK)
}

fn verify(
    args: &LawArgs,
    levels: u32,
    spine: bool,
    tol: f64,
    max_entries: usize,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    if tol.is_nan() || tol < 0.0 {
        return Err(Failure::Input(format!("--tol must be nonnegative, got {tol}")));
    }
    let law = load(args)?;
    let alpha = solve_malthusian(&law, DEFAULT_TOL).map_err(input)?.alpha;
    // refuse before writing anything
    match check_nonperiodicity(&law) {
        1 => {}
        0 => return Err(Failure::Input("the law has no reproduction".into())),
        d => {
            return Err(Failure::Input(format!(
                "Periodic: the law has period {d}; rescale ages by {d} before verifying"
            )))
        }
    }
    let sl = if spine {
        Some(build_spine_law(&law, alpha).map_err(input)?)
    } else {
        None
    };
    let mut reports = Vec::new();
    for n in 1..=levels {
        let rows = match &sl {
            Some(sl) => {
                let r = verify_change_of_measure_capped(&law, sl, n, tol, max_entries).map_err(input)?;
                let mass_ok = |m: f64| (m - 1.0).abs() <= tol;
                vec![
                    ("tree-by-tree", r.trees, r.spined_entries, r.max_deviation, r.max_deviation <= tol),
                    ("pairs", r.trees, r.spined_entries, r.max_pair_deviation, r.max_pair_deviation <= tol),
                    ("ordinary-mass", r.trees, 0, (r.ordinary_mass - 1.0).abs(), mass_ok(r.ordinary_mass)),
                    ("spined-mass", 0, r.spined_entries, (r.spined_mass - 1.0).abs(), mass_ok(r.spined_mass)),
                ]
            }
            None => {
                let r = verify_martingale_mean_capped(&law, alpha, n, tol, max_entries).map_err(input)?;
                vec![
                    ("mean", r.trees, 0, r.mean_deviation, r.mean_deviation <= tol),
                    ("one-step", r.extension_trees, 0, r.one_step_deviation, r.one_step_deviation <= tol),
                    ("extension-marginal", r.extension_trees, 0, r.marginal_deviation, r.marginal_deviation <= tol),
                ]
            }
        };
        reports.push((n, rows));
    }
    let mut t = Table::new(
        out,
        args.out,
        &[
            ("law", text(args.law.clone())),
            ("mode", text(if spine { "change-of-measure" } else { "martingale" })),
            ("tol", Field::Float(tol)),
        ],
        columns(&["level", "check", "trees", "spined_entries", "deviation", "passed"]),
    )?;
    let mut all_passed = true;
    let mut worst: f64 = 0.0;
    for (n, rows) in reports {
        for (check, trees, entries, deviation, passed) in rows {
            all_passed &= passed;
            worst = worst.max(deviation);
            t.row(vec![
                Field::Int(u64::from(n)),
                text(check),
                Field::Int(trees as u64),
                Field::Int(entries as u64),
                Field::Float(deviation),
                Field::Bool(passed),
            ])?;
        }
    }
    t.summary(&[
        ("max_deviation".into(), Field::Float(worst)),
        ("passed".into(), Field::Bool(all_passed)),
    ])?;
    Ok(if all_passed { EXIT_OK } else { EXIT_FAILED })
}

fn growth(args: &RunArgs, chi: &[String], out: &mut dyn Write) -> Result<i32, Failure> {
    let law = load(&args.law)?;
    let chis = chi
        .iter()
        .map(|c| Characteristic::parse(c.trim()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(input)?;
    let report =
        growth_ratio_estimate(&law, args.levels, args.reps, &chis, args.seed, args.max_vertices).map_err(input)?;
    let mut names = vec!["replicate".to_string(), "survived".to_string()];
    for c in &report.names {
        names.extend([c.clone(), format!("{c}_previous"), format!("growth_{c}")]);
    }
    for c in report.names.iter().skip(1) {
        names.push(format!("ratio_{}_{c}", report.names[0]));
    }
    let mut meta = stochastic_meta(args);
    meta.push(("alpha", Field::Float(report.alpha)));
    let mut t = Table::new(out, args.law.out, &meta, names)?;
    for r in &report.rows {
        let mut values = vec![Field::Int(r.replicate), Field::Bool(r.survived)];
        for i in 0..chis.len() {
            values.extend([Field::Float(r.current[i]), Field::Float(r.previous[i]), opt_float(r.growth(i))]);
        }
        for i in 1..chis.len() {
            values.push(opt_float(r.ratio(i)));
        }
        t.row(values)?;
    }
    let mut summary = vec![
        ("survivors".to_string(), Field::Int(report.survivors as u64)),
        ("expected_growth".to_string(), Field::Float(report.expected_growth())),
    ];
    for (i, c) in report.names.iter().enumerate() {
        summary.push((format!("chi_bar_{c}"), Field::Float(report.chi_bar[i])));
        summary.push((format!("median_growth_{c}"), Field::Float(report.median_growth[i])));
    }
    for (i, c) in report.names.iter().enumerate().skip(1) {
        let key = format!("{}_{c}", report.names[0]);
        summary.push((format!("median_ratio_{key}"), Field::Float(report.median_ratio[i])));
        summary.push((format!("expected_ratio_{key}"), Field::Float(report.expected_ratio(i))));
    }
    t.summary(&summary)?;
    Ok(EXIT_OK)
}

fn moment_row(name: &str, v: &MomentValue) -> Vec<Field> {
    match v {
        MomentValue::Finite { value, tail_bound } => vec![
            text(name),
            text("finite"),
            Field::Float(*value),
            Field::Float(*tail_bound),
            Field::Empty,
        ],
        MomentValue::Divergent { rule, .. } => {
            vec![text(name), text("divergent"), Field::Empty, Field::Empty, text(rule.clone())]
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn xlogx(
    law: Option<&str>,
    family: Option<FamilyName>,
    s: f64,
    k0: u64,
    q: f64,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let fam = match (law, family) {
        (Some(source), _) => TailFamily::finite(load_law(source).map_err(|e| Failure::Input(format!("{source}: {e}")))?),
        (None, Some(FamilyName::DelayedPower)) => TailFamily::delayed_power(s, k0).map_err(input)?,
        (None, Some(FamilyName::DelayedZeta2)) => TailFamily::delayed_zeta2(),
        (None, Some(FamilyName::DelayedZeta2Log)) => TailFamily::delayed_zeta2_log(q).map_err(input)?,
        (None, None) => return Err(Failure::Input("give --law or --family".into())),
    };
    let r = classify_xlogx(&fam).map_err(input)?;
    let source = law.map_or_else(|| fam.to_string(), str::to_string);
    let mut t = Table::new(
        out,
        format,
        &[("family", text(source))],
        columns(&["quantity", "status", "value", "tail_bound", "rule"]),
    )?;
    t.row(vec![text("alpha"), text("finite"), Field::Float(r.alpha), Field::Empty, Field::Empty])?;
    t.row(moment_row("beta", &r.beta))?;
    t.row(moment_row("xi_log_xi", &r.xi_log_xi))?;
    t.row(moment_row("xi_log_nu", &r.xi_log_nu))?;
    t.row(moment_row("nu_log_nu", &r.nu_log_nu))?;
    t.summary(&[
        ("consistent".into(), Field::Bool(r.consistent)),
        ("violations".into(), text(r.violations.join("; "))),
    ])?;
    Ok(if r.consistent { EXIT_OK } else { EXIT_FAILED })
}
