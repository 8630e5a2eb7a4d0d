//! `rankpower`: exact and simulated power of two-sample rank tests.

mod output;

use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rankpower::asymptotics::{GaussianLocalPower, PowerExpansion};
use rankpower::exact::{critical_value_with, exact_power_with, mp_test_with, null_pmf_with, ExactConfig};
use rankpower::ranks::{DEFAULT_ENUMERATION_CAP, DEFAULT_SCORE_TOLERANCE};
use rankpower::simulate::{PermutationConfig, DEFAULT_CHUNK_SIZE};
use rankpower::{
    are, deficiency_curve, deficiency_leading_coeff, lmp_scores, matched_sample_size, power_mc,
    rankset_prob_lehmann, score_vector, Alternative, ComparatorTest, DistributionFamily, Error, FamilyKind,
    MatchConfig, PowerTest, RankSet, RngSpec, SampleSizes, ScoreKind, TestSpec,
};
use serde_json::Value;

use output::{num, rational, Format, Record};

#[derive(Parser, Debug)]
#[command(name = "rankpower", version, about = "Power of two-sample rank tests under Lehmann and shift alternatives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output encoding.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads (falls back to RANKPOWER_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Work-unit size for parallel enumeration and Monte Carlo chunks.
    #[arg(long, global = true)]
    chunk_size: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Null distribution of a linear rank statistic.
    NullDist(RankArgs),
    /// Randomized critical value at level alpha.
    Critical(LevelArgs),
    /// Probability of a Y-rank set under (U, U^a).
    ProbRankset(ProbArgs),
    /// Exact power against a Lehmann alternative.
    PowerExact(PowerExactArgs),
    /// Monte Carlo power.
    PowerMc(PowerMcArgs),
    /// Most powerful rank test against a given Lehmann alternative.
    MpTest(MpArgs),
    /// Locally most powerful (Savage) scores.
    LmpScores(SizeArgs),
    /// Asymptotic relative efficiency of two power expansions.
    Are(ExpansionArgs),
    /// Deficiency curve and expansion of two power expansions.
    DeficiencyExpansion(DeficiencyArgs),
    /// Empirical deficiency by Monte Carlo sample-size matching.
    DeficiencyMc(DeficiencyMcArgs),
}

#[derive(Args, Debug)]
struct SizeArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
}

#[derive(Args, Debug)]
struct RankArgs {
    #[command(flatten)]
    sizes: SizeArgs,
    #[arg(long, default_value = "wilcoxon", value_parser = parse_scores)]
    scores: ScoreKind,
    /// Maximum number of rank sets to enumerate.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: u64,
}

#[derive(Args, Debug)]
struct LevelArgs {
    #[command(flatten)]
    rank: RankArgs,
    #[arg(long)]
    alpha: f64,
    /// Non-randomized test (gamma = 0).
    #[arg(long)]
    conservative: bool,
}

#[derive(Args, Debug)]
struct ProbArgs {
    #[command(flatten)]
    sizes: SizeArgs,
    /// Comma-separated ranks of the second sample.
    #[arg(long, value_delimiter = ',', required = true)]
    ranks: Vec<u32>,
    #[arg(long)]
    a: f64,
}

#[derive(Args, Debug)]
struct PowerExactArgs {
    #[command(flatten)]
    level: LevelArgs,
    #[arg(long)]
    a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum McTest {
    Rank,
    Mp,
    T,
    PermMean,
    PermScore,
}

#[derive(Args, Debug)]
#[group(id = "alternative", required = true, multiple = false, args = ["a", "shift", "c"])]
struct AltArgs {
    /// Lehmann exponent: Y ~ F^a.
    #[arg(long)]
    a: Option<f64>,
    /// Shift: Y ~ F(x - shift).
    #[arg(long)]
    shift: Option<f64>,
    /// Local shift c / sqrt(n).
    #[arg(long)]
    c: Option<f64>,
}

#[derive(Args, Debug)]
struct PermArgs {
    /// Resamples for permutation tests when not enumerated.
    #[arg(long, default_value_t = 999)]
    perm_resamples: usize,
    /// Enumerate permutation tests when C(N, n) is at most this.
    #[arg(long, default_value_t = 5000)]
    perm_exact_cap: u64,
}

#[derive(Args, Debug)]
struct PowerMcArgs {
    #[command(flatten)]
    level: LevelArgs,
    #[command(flatten)]
    alt: AltArgs,
    #[arg(long, value_enum, default_value_t = McTest::Rank)]
    test: McTest,
    /// Design exponent of the most powerful test (defaults to --a).
    #[arg(long)]
    mp_a: Option<f64>,
    #[arg(long, default_value = "uniform", value_parser = parse_family)]
    family: FamilyKind,
    #[arg(long, default_value_t = 100_000)]
    reps: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    perm: PermArgs,
}

#[derive(Args, Debug)]
struct MpArgs {
    #[command(flatten)]
    sizes: SizeArgs,
    #[arg(long)]
    a: f64,
    #[arg(long)]
    alpha: f64,
    /// Evaluate power at this exponent as well (defaults to --a).
    #[arg(long)]
    b: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: u64,
}

#[derive(Args, Debug)]
struct ExpansionArgs {
    /// Coefficient table (header c,p0,p1,p2); give twice, A then B.
    #[arg(long)]
    coeffs: Vec<String>,
    /// Gaussian local power efficacy; give twice, A then B.
    #[arg(long)]
    efficacy: Vec<f64>,
    /// Level of the Gaussian local power models.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    c: f64,
}

#[derive(Args, Debug)]
struct DeficiencyArgs {
    #[command(flatten)]
    exp: ExpansionArgs,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    n_grid: Vec<f64>,
}

#[derive(Args, Debug)]
struct DeficiencyMcArgs {
    /// Reference procedure: wilcoxon, vdw, normal, savage, t, perm-mean, perm-score.
    #[arg(long)]
    test_a: String,
    /// Procedure whose matching sample size is sought.
    #[arg(long)]
    test_b: String,
    #[arg(long, value_parser = parse_family)]
    family: FamilyKind,
    #[arg(long)]
    c: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    n_grid: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    reps: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Skip isotonic smoothing of the power curve.
    #[arg(long)]
    no_isotonic: bool,
    /// Powers this far below the target count as matching.
    #[arg(long, default_value_t = 0.0)]
    target_tolerance: f64,
    #[command(flatten)]
    perm: PermArgs,
}

fn parse_scores(s: &str) -> Result<ScoreKind, String> {
    s.parse::<ScoreKind>().map_err(|e| e.to_string())
}

fn parse_family(s: &str) -> Result<FamilyKind, String> {
    s.parse::<FamilyKind>().map_err(|e| e.to_string())
}

struct Ctx {
    chunk_size: Option<u64>,
}

impl Ctx {
    fn exact(&self, cap: u64) -> ExactConfig {
        let mut cfg = ExactConfig { cap, ..ExactConfig::default() };
        if let Some(c) = self.chunk_size {
            cfg.chunk_size = c.max(1);
        }
        cfg
    }

    fn rng(&self, seed: u64) -> RngSpec {
        RngSpec::with_chunk_size(seed, self.chunk_size.unwrap_or(DEFAULT_CHUNK_SIZE))
    }

    fn record_chunk(&self, rec: &mut Record) {
        if let Some(c) = self.chunk_size {
            rec.param("chunk_size", c);
        }
    }
}

fn sizes(rec: &mut Record, s: &SizeArgs) -> rankpower::Result<SampleSizes> {
    rec.param("m", s.m);
    rec.param("n", s.n);
    SampleSizes::new(s.m, s.n)
}

fn null_dist(ctx: &Ctx, args: &RankArgs, rec: &mut Record) -> rankpower::Result<()> {
    let sz = sizes(rec, &args.sizes)?;
    rec.param("scores", args.scores.name());
    rec.param("cap", args.cap);
    ctx.record_chunk(rec);
    let scores = score_vector(args.scores, sz.total(), DEFAULT_SCORE_TOLERANCE)?;
    let pmf = null_pmf_with(&scores, sz, &ctx.exact(args.cap))?;
    rec.columns(&["t", "prob", "exact"]);
    for (i, (&t, &p)) in pmf.support().iter().zip(pmf.probs()).enumerate() {
        let exact = pmf.exact().map(|e| Value::from(rational(e.counts[i], e.total))).unwrap_or(Value::Null);
        rec.row(vec![num(t), num(p), exact]);
    }
    Ok(())
}

fn level_params(rec: &mut Record, args: &LevelArgs) {
    rec.param("scores", args.rank.scores.name());
    rec.param("alpha", num(args.alpha));
    rec.param("conservative", args.conservative);
    rec.param("cap", args.rank.cap);
}

fn critical(ctx: &Ctx, args: &LevelArgs, rec: &mut Record) -> rankpower::Result<()> {
    let sz = sizes(rec, &args.rank.sizes)?;
    level_params(rec, args);
    ctx.record_chunk(rec);
    let scores = score_vector(args.rank.scores, sz.total(), DEFAULT_SCORE_TOLERANCE)?;
    let t = critical_value_with(&scores, sz, args.alpha, args.conservative, &ctx.exact(args.rank.cap))?;
    rec.columns(&["threshold", "gamma", "size"]);
    rec.row(vec![num(t.threshold), num(t.gamma), num(t.size)]);
    Ok(())
}

fn prob_rankset(args: &ProbArgs, rec: &mut Record) -> rankpower::Result<()> {
    let sz = sizes(rec, &args.sizes)?;
    let ranks = RankSet::new(args.ranks.clone(), sz)?;
    rec.param("ranks", ranks.to_string());
    rec.param("a", num(args.a));
    let p = rankset_prob_lehmann(&ranks, args.a)?;
    rec.columns(&["ranks", "prob"]);
    rec.row(vec![ranks.to_string().into(), num(p)]);
    Ok(())
}

fn power_exact(ctx: &Ctx, args: &PowerExactArgs, rec: &mut Record) -> rankpower::Result<()> {
    let sz = sizes(rec, &args.level.rank.sizes)?;
    level_params(rec, &args.level);
    rec.param("a", num(args.a));
    ctx.record_chunk(rec);
    let cfg = ctx.exact(args.level.rank.cap);
    let scores = score_vector(args.level.rank.scores, sz.total(), DEFAULT_SCORE_TOLERANCE)?;
    let t = critical_value_with(&scores, sz, args.level.alpha, args.level.conservative, &cfg)?;
    let power = exact_power_with(&t, args.a, &cfg)?;
    rec.columns(&["threshold", "gamma", "size", "power"]);
    rec.row(vec![num(t.threshold), num(t.gamma), num(t.size), num(power)]);
    Ok(())
}

fn alternative(rec: &mut Record, alt: &AltArgs, family: DistributionFamily) -> rankpower::Result<Alternative> {
    if let Some(a) = alt.a {
        rec.param("a", num(a));
        Alternative::lehmann(a)
    } else if let Some(s) = alt.shift {
        rec.param("shift", num(s));
        Alternative::shift(s, family)
    } else {
        let c = alt.c.expect("clap enforces one alternative");
        rec.param("c", num(c));
        Alternative::local(c, family)
    }
}

fn perm_config(rec: &mut Record, p: &PermArgs) -> PermutationConfig {
    rec.param("perm_resamples", p.perm_resamples);
    rec.param("perm_exact_cap", p.perm_exact_cap);
    PermutationConfig { exact_cap: p.perm_exact_cap, resamples: p.perm_resamples }
}

fn power_mc_cmd(ctx: &Ctx, args: &PowerMcArgs, rec: &mut Record) -> rankpower::Result<()> {
    let sz = sizes(rec, &args.level.rank.sizes)?;
    let family = DistributionFamily::standard(args.family);
    rec.param("test", args.test.to_possible_value().expect("named").get_name().to_string());
    let alt = alternative(rec, &args.alt, family)?;
    rec.param("family", args.family.name());
    rec.param("alpha", num(args.level.alpha));
    let cfg = ctx.exact(args.level.rank.cap);
    let test = match args.test {
        McTest::Rank => {
            rec.param("scores", args.level.rank.scores.name());
            rec.param("conservative", args.level.conservative);
            let scores = score_vector(args.level.rank.scores, sz.total(), DEFAULT_SCORE_TOLERANCE)?;
            PowerTest::Rank(critical_value_with(&scores, sz, args.level.alpha, args.level.conservative, &cfg)?)
        }
        McTest::Mp => {
            let a = args.mp_a.or(args.alt.a).ok_or_else(|| {
                Error::InvalidParameter("the most powerful test needs --mp-a or a Lehmann --a".into())
            })?;
            rec.param("mp_a", num(a));
            PowerTest::Mp(mp_test_with(sz, a, args.level.alpha, &cfg)?)
        }
        McTest::T => PowerTest::Comparator(ComparatorTest::two_sample_t(sz, args.level.alpha)?),
        McTest::PermMean => {
            let p = perm_config(rec, &args.perm);
            PowerTest::Comparator(ComparatorTest::permutation_mean(sz, args.level.alpha, p)?)
        }
        McTest::PermScore => {
            let p = perm_config(rec, &args.perm);
            PowerTest::Comparator(ComparatorTest::efficient_score(sz, args.level.alpha, args.family, p)?)
        }
    };
    ctx.record_chunk(rec);
    rec.seed = Some(args.seed);
    rec.reps = Some(args.reps);
    let est = power_mc(&test, sz, &alt, &family, args.reps, &ctx.rng(args.seed))?;
    rec.columns(&["test", "estimate", "std_error", "rejections", "reps"]);
    rec.row(vec![est.test_id.into(), num(est.estimate), num(est.std_error), est.rejections.into(), est.reps.into()]);
    Ok(())
}

fn mp_cmd(ctx: &Ctx, args: &MpArgs, rec: &mut Record) -> rankpower::Result<()> {
    let sz = sizes(rec, &args.sizes)?;
    rec.param("a", num(args.a));
    rec.param("alpha", num(args.alpha));
    let b = args.b.unwrap_or(args.a);
    rec.param("b", num(b));
    rec.param("cap", args.cap);
    ctx.record_chunk(rec);
    let t = mp_test_with(sz, args.a, args.alpha, &ctx.exact(args.cap))?;
    rec.summary("gamma", num(t.gamma));
    rec.summary("size", num(t.size()));
    rec.summary("power", num(t.power(b)?));
    rec.columns(&["ranks", "role", "phi", "prob_alt"]);
    for (set, role, phi) in t
        .reject_set
        .iter()
        .map(|r| (r, "reject", 1.0))
        .chain(t.boundary_set.iter().map(|r| (r, "boundary", t.gamma)))
    {
        rec.row(vec![set.to_string().into(), role.into(), num(phi), num(rankset_prob_lehmann(set, args.a)?)]);
    }
    Ok(())
}

fn lmp_cmd(args: &SizeArgs, rec: &mut Record) -> rankpower::Result<()> {
    let sz = sizes(rec, args)?;
    let s = lmp_scores(sz.total())?;
    rec.columns(&["rank", "score"]);
    for (i, v) in s.values().iter().enumerate() {
        rec.row(vec![(i + 1).into(), num(*v)]);
    }
    Ok(())
}

fn expansions(rec: &mut Record, args: &ExpansionArgs) -> rankpower::Result<(PowerExpansion, PowerExpansion)> {
    rec.param("c", num(args.c));
    match (args.coeffs.len(), args.efficacy.len()) {
        (2, 0) => {
            rec.param("coeffs", Value::from(args.coeffs.clone()));
            Ok((PowerExpansion::from_csv_path(&args.coeffs[0])?, PowerExpansion::from_csv_path(&args.coeffs[1])?))
        }
        (0, 2) => {
            rec.param("efficacy", Value::from(args.efficacy.iter().map(|&e| num(e)).collect::<Vec<_>>()));
            rec.param("alpha", num(args.alpha));
            Ok((
                GaussianLocalPower::new(args.efficacy[0], args.alpha)?.expansion(),
                GaussianLocalPower::new(args.efficacy[1], args.alpha)?.expansion(),
            ))
        }
        _ => Err(Error::InvalidParameter(
            "give exactly two --coeffs files or exactly two --efficacy values (A then B)".into(),
        )),
    }
}

fn are_cmd(args: &ExpansionArgs, rec: &mut Record) -> rankpower::Result<()> {
    let (a, b) = expansions(rec, args)?;
    let e = are(&a, &b, args.c)?;
    rec.columns(&["c", "are"]);
    rec.row(vec![num(args.c), num(e)]);
    Ok(())
}

fn deficiency_cmd(args: &DeficiencyArgs, rec: &mut Record) -> rankpower::Result<()> {
    let (a, b) = expansions(rec, &args.exp)?;
    rec.param("n_grid", Value::from(args.n_grid.iter().map(|&n| num(n)).collect::<Vec<_>>()));
    let c = args.exp.c;
    let fit = deficiency_curve(&a, &b, c, &args.n_grid)?;
    rec.summary("h1", num(fit.h1));
    rec.summary("h2", num(fit.h2));
    rec.summary("residual", num(fit.residual));
    match deficiency_leading_coeff(&a, &b, c) {
        Ok(h) => rec.summary("h1_closed_form", num(h)),
        Err(e) => rec.summary("h1_closed_form", e.name()),
    }
    rec.columns(&["n", "k", "d", "error"]);
    for p in &fit.points {
        match &p.k {
            Ok(k) => rec.row(vec![num(p.n), num(*k), num(k - p.n), Value::Null]),
            Err(name) => rec.row(vec![num(p.n), Value::Null, Value::Null, name.clone().into()]),
        }
    }
    Ok(())
}

fn test_spec(name: &str, alpha: f64, family: FamilyKind, perm: PermutationConfig) -> rankpower::Result<TestSpec> {
    Ok(match name {
        "t" => TestSpec::TwoSampleT { alpha },
        "perm-mean" => TestSpec::PermutationMean { alpha, perm },
        "perm-score" => TestSpec::EfficientScore { family, alpha, perm },
        other => TestSpec::Rank {
            kind: other.parse().map_err(|_| {
                Error::InvalidParameter(format!(
                    "unknown test '{other}' (wilcoxon, vdw, normal, savage, t, perm-mean, perm-score)"
                ))
            })?,
            alpha,
            conservative: false,
        },
    })
}

fn deficiency_mc_cmd(ctx: &Ctx, args: &DeficiencyMcArgs, rec: &mut Record) -> rankpower::Result<()> {
    rec.param("test_a", args.test_a.clone());
    rec.param("test_b", args.test_b.clone());
    rec.param("family", args.family.name());
    rec.param("c", num(args.c));
    rec.param("alpha", num(args.alpha));
    rec.param("n_grid", Value::from(args.n_grid.clone()));
    rec.param("isotonic", !args.no_isotonic);
    rec.param("target_tolerance", num(args.target_tolerance));
    let perm = perm_config(rec, &args.perm);
    ctx.record_chunk(rec);
    rec.seed = Some(args.seed);
    rec.reps = Some(args.reps);
    let a = test_spec(&args.test_a, args.alpha, args.family, perm)?;
    let b = test_spec(&args.test_b, args.alpha, args.family, perm)?;
    let mut cfg = MatchConfig::new(args.reps, ctx.rng(args.seed));
    cfg.isotonic = !args.no_isotonic;
    cfg.target_tolerance = args.target_tolerance;
    cfg.exact = ctx.exact(DEFAULT_ENUMERATION_CAP);
    let family = DistributionFamily::standard(args.family);
    let rows = matched_sample_size(&b, &a, &args.n_grid, args.c, &family, &cfg)?;
    rec.columns(&["n", "target", "target_se", "k", "d", "power_at_k", "within_noise", "k_resolution", "evaluated"]);
    for r in rows {
        let evaluated: Vec<String> = r.evaluations.iter().map(|(k, e)| format!("{k}:{}", e.estimate)).collect();
        rec.row(vec![
            r.n.into(),
            num(r.target.estimate),
            num(r.target.std_error),
            r.k.into(),
            r.deficiency.into(),
            num(r.power_at_k),
            r.within_noise.into(),
            num(r.k_resolution),
            evaluated.join(" ").into(),
        ]);
    }
    Ok(())
}

fn configure_threads(cli_threads: Option<usize>) -> Result<(), String> {
    let threads = match cli_threads {
        Some(t) => Some(t),
        None => match std::env::var("RANKPOWER_THREADS") {
            Ok(v) if !v.trim().is_empty() => {
                Some(v.trim().parse::<usize>().map_err(|_| format!("RANKPOWER_THREADS must be an integer, got '{v}'"))?)
            }
            _ => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err("thread count must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = configure_threads(cli.threads) {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let ctx = Ctx { chunk_size: cli.chunk_size };
    let name = match &cli.command {
        Command::NullDist(_) => "null-dist",
        Command::Critical(_) => "critical",
        Command::ProbRankset(_) => "prob-rankset",
        Command::PowerExact(_) => "power-exact",
        Command::PowerMc(_) => "power-mc",
        Command::MpTest(_) => "mp-test",
        Command::LmpScores(_) => "lmp-scores",
        Command::Are(_) => "are",
        Command::DeficiencyExpansion(_) => "deficiency-expansion",
        Command::DeficiencyMc(_) => "deficiency-mc",
    };
    let mut rec = Record::new(name);
    let result = match &cli.command {
        Command::NullDist(a) => null_dist(&ctx, a, &mut rec),
        Command::Critical(a) => critical(&ctx, a, &mut rec),
        Command::ProbRankset(a) => prob_rankset(a, &mut rec),
        Command::PowerExact(a) => power_exact(&ctx, a, &mut rec),
        Command::PowerMc(a) => power_mc_cmd(&ctx, a, &mut rec),
        Command::MpTest(a) => mp_cmd(&ctx, a, &mut rec),
        Command::LmpScores(a) => lmp_cmd(a, &mut rec),
        Command::Are(a) => are_cmd(a, &mut rec),
        Command::DeficiencyExpansion(a) => deficiency_cmd(a, &mut rec),
        Command::DeficiencyMc(a) => deficiency_mc_cmd(&ctx, a, &mut rec),
    };
    let code = match &result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            rec.error = Some((e.name().to_string(), e.to_string()));
            match e {
                Error::InvalidParameter(_) | Error::LengthMismatch { .. } => 2,
                _ => 3,
            }
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    if let Err(e) = rec.write(cli.format, &mut lock).and_then(|_| lock.flush()) {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(3);
    }
    ExitCode::from(code)
}
