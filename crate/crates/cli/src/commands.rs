use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::Context as _;
use cnss::bounds::{bound_table, ErParams};
use cnss::calibration::{calibrate as calibrate_table, AlphaGrid, CalibrationTable};
use cnss::detect::{detect_multiple, Detector, MultiOptions, RemovalMode};
use cnss::eval::{detection_power, prf, MetricReport};
use cnss::graph::{erdos_renyi, load_edge_list, random_walk_subgraph, Graph};
use cnss::search::{SearchMode, Searcher};
use cnss::signals::{inject, null_pvalues, read_truth, write_truth, PValues, SignalSpec};

use crate::{
    BoundsArgs, CalibrateArgs, CalibrationSource, EvaluateArgs, Failure, GenerateArgs, GraphSource, GridArgs,
    PowerArgs, ScanArgs, ScoringArgs, SearchArgs, CALIBRATION_SEED_OFFSET, SIGNIFICANCE_SEED_OFFSET,
};

pub struct Context {
    pub seed: u64,
    pub force: bool,
}

impl Context {
    fn calibration_seed(&self) -> u64 {
        self.seed.wrapping_add(CALIBRATION_SEED_OFFSET)
    }

    fn significance_seed(&self) -> u64 {
        self.seed.wrapping_add(SIGNIFICANCE_SEED_OFFSET)
    }

    fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }

    /// Fails early if `path` exists and --force was not given.
    fn check_output(&self, path: &Path) -> Result<(), Failure> {
        if !self.force && path.exists() {
            return Err(Failure::Data(anyhow::anyhow!(
                "{} already exists; pass --force to overwrite",
                path.display()
            )));
        }
        Ok(())
    }

    fn create(&self, path: &Path) -> Result<BufWriter<File>, Failure> {
        self.check_output(path)?;
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(file))
    }

    /// Writes to `path`, or to stdout when it is `None`.
    fn emit(
        &self,
        path: Option<&Path>,
        body: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>,
    ) -> Result<(), Failure> {
        match path {
            Some(p) => {
                let mut w = self.create(p)?;
                body(&mut w)?;
                w.flush()?;
            }
            None => {
                let stdout = io::stdout();
                let mut w = stdout.lock();
                body(&mut w)?;
                w.flush()?;
            }
        }
        Ok(())
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn load_graph(ctx: &Context, source: &GraphSource) -> anyhow::Result<Graph> {
    match (&source.graph, source.er) {
        (Some(path), _) => load_edge_list(open(path)?).with_context(|| format!("reading {}", path.display())),
        (None, Some((n, p))) => Ok(erdos_renyi(n, p, ctx.seed)?),
        (None, None) => unreachable!("clap requires one graph source"),
    }
}

fn grid(args: &GridArgs) -> Result<AlphaGrid, Failure> {
    let parsed = match (&args.alpha_grid, args.alpha_max) {
        (Some(list), _) => list.parse(),
        (None, Some(max)) => AlphaGrid::with_max(max),
        (None, None) => Ok(AlphaGrid::default()),
    };
    parsed.map_err(|e| Failure::Usage(e.to_string()))
}

fn search_mode(args: &SearchArgs) -> Result<SearchMode, Failure> {
    match args.coretree {
        None => Ok(SearchMode::Plain),
        Some(0) => Err(Failure::Usage("--coretree width must be at least 1".into())),
        Some(d) => Ok(SearchMode::CoreTree { d }),
    }
}

fn er_params(source: &GraphSource) -> Option<ErParams> {
    source.er.map(|(n, p)| ErParams { n, p })
}

fn build_table(
    ctx: &Context,
    g: &Graph,
    source: &GraphSource,
    searcher: &Searcher<'_>,
    grid: &AlphaGrid,
    scoring: &ScoringArgs,
) -> anyhow::Result<CalibrationTable> {
    let CalibrationSource {
        table,
        bounds,
        no_calibration,
        ..
    } = &scoring.calibration;
    if let Some(path) = table {
        return CalibrationTable::load(open(path)?, Some(g)).with_context(|| format!("reading {}", path.display()));
    }
    if *bounds {
        return Ok(bound_table(g, grid, er_params(source))?);
    }
    if *no_calibration {
        return Ok(CalibrationTable::uncalibrated(g, grid));
    }
    Ok(calibrate_table(
        searcher,
        grid,
        scoring.k_replicas,
        ctx.calibration_seed(),
    )?)
}

fn write_curve(table: &CalibrationTable, out: &mut dyn Write) -> anyhow::Result<()> {
    writeln!(out, "N,alpha,alpha_prime,source")?;
    for (a, &alpha) in table.grid.values().iter().enumerate() {
        for (i, ap) in table.curve(a).iter().enumerate() {
            writeln!(out, "{},{alpha},{ap},{}", i + 1, table.provenance)?;
        }
    }
    Ok(())
}

fn save_table(ctx: &Context, table: &CalibrationTable, out: &Path, curve: Option<&Path>) -> Result<(), Failure> {
    let mut w = ctx.create(out)?;
    table.save(&mut w)?;
    w.flush()?;
    if let Some(path) = curve {
        ctx.emit(Some(path), |w| write_curve(table, w))?;
    }
    Ok(())
}

pub fn generate(ctx: &Context, args: GenerateArgs) -> Result<(), Failure> {
    if args.signal.is_some() && args.true_size == 0 {
        return Err(Failure::Usage("--true-size must be at least 1".into()));
    }
    let graph_path = args.out.join("graph.txt");
    let p_path = args.out.join("pvalues.txt");
    let truth_path = args.out.join("truth.txt");
    for path in [&graph_path, &p_path, &truth_path] {
        ctx.check_output(path)?;
    }
    let g = load_graph(ctx, &args.source)?;
    let (p, truth) = match args.signal {
        Some(kind) => {
            let truth = random_walk_subgraph(&g, args.true_size, ctx.seed)?;
            let spec = SignalSpec { kind, truth };
            (inject(&g, &spec, ctx.seed)?, Some(spec.truth))
        }
        None => (null_pvalues(g.node_count(), ctx.seed)?, None),
    };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    ctx.emit(Some(&graph_path), |w| Ok(g.write_edge_list(w)?))?;
    ctx.emit(Some(&p_path), |w| Ok(p.write(&g, w)?))?;
    if let Some(truth) = truth {
        ctx.emit(Some(&truth_path), |w| Ok(write_truth(&g, &truth, w)?))?;
    }
    Ok(())
}

pub fn calibrate(ctx: &Context, args: CalibrateArgs) -> Result<(), Failure> {
    let grid = grid(&args.grid)?;
    let mode = search_mode(&args.search)?;
    if args.k_replicas == 0 {
        return Err(Failure::Usage("--k-replicas must be at least 1".into()));
    }
    ctx.check_output(&args.out)?;
    if let Some(c) = &args.curve {
        ctx.check_output(c)?;
    }
    let g = load_graph(ctx, &args.source)?;
    let searcher = Searcher::new(&g, mode)?;
    let table = calibrate_table(&searcher, &grid, args.k_replicas, ctx.calibration_seed())?;
    save_table(ctx, &table, &args.out, args.curve.as_deref())
}

pub fn bounds(ctx: &Context, args: BoundsArgs) -> Result<(), Failure> {
    let grid = grid(&args.grid)?;
    ctx.check_output(&args.out)?;
    if let Some(c) = &args.curve {
        ctx.check_output(c)?;
    }
    let g = load_graph(ctx, &args.source)?;
    let table = bound_table(&g, &grid, er_params(&args.source))?;
    save_table(ctx, &table, &args.out, args.curve.as_deref())
}

/// Graph, grid and search mode shared by the scoring commands.
struct Setup {
    g: Graph,
    grid: AlphaGrid,
    mode: SearchMode,
}

fn setup(ctx: &Context, source: &GraphSource, scoring: &ScoringArgs) -> Result<Setup, Failure> {
    let grid = grid(&scoring.grid)?;
    let mode = search_mode(&scoring.search)?;
    if scoring.k_replicas == 0 {
        return Err(Failure::Usage("--k-replicas must be at least 1".into()));
    }
    let g = load_graph(ctx, source)?;
    Ok(Setup { g, grid, mode })
}

pub fn scan(ctx: &Context, args: ScanArgs) -> Result<(), Failure> {
    if args.max_clusters == 0 {
        return Err(Failure::Usage("--max-clusters must be at least 1".into()));
    }
    if args.max_clusters > 1 && args.replicas == 0 {
        return Err(Failure::Usage("--max-clusters above 1 needs --replicas".into()));
    }
    if let Some(out) = &args.out {
        ctx.check_output(out)?;
    }
    let s = setup(ctx, &args.source, &args.scoring)?;
    let p = PValues::read(&s.g, open(&args.pvalues)?).with_context(|| format!("reading {}", args.pvalues.display()))?;
    let searcher = Searcher::new(&s.g, s.mode)?;
    let table = build_table(ctx, &s.g, &args.source, &searcher, &s.grid, &args.scoring)?;
    let detector = Detector::with_searcher(searcher, &table, &s.grid, args.scoring.statistic)?;

    let json = if args.max_clusters > 1 {
        let opts = MultiOptions {
            max_clusters: args.max_clusters,
            threshold: args.threshold,
            removal: RemovalMode::PValueOne,
            replicas: args.replicas,
            base_seed: ctx.significance_seed(),
        };
        let found = detect_multiple(&detector, &p, &opts, None)?;
        serde_json::to_string_pretty(&found)?
    } else {
        let mut result = detector.detect(&p)?;
        if args.replicas > 0 {
            result = detector.significance_test(&result, args.replicas, ctx.significance_seed())?;
        }
        result.to_json()
    };
    ctx.emit(args.out.as_deref(), |w| Ok(writeln!(w, "{json}")?))
}

/// Truth and p-values for simulation run `run`.
fn simulate(
    ctx: &Context,
    g: &Graph,
    kind: cnss::signals::SignalKind,
    size: usize,
    run: usize,
) -> anyhow::Result<(SignalSpec, PValues)> {
    let seed = ctx.run_seed(run);
    let truth = random_walk_subgraph(g, size, seed)?;
    let spec = SignalSpec { kind, truth };
    let p = inject(g, &spec, seed)?;
    Ok((spec, p))
}

pub fn evaluate(ctx: &Context, args: EvaluateArgs) -> Result<(), Failure> {
    if let Some(out) = &args.out {
        ctx.check_output(out)?;
    }
    if let (Some(truth_path), Some(result_path)) = (&args.truth, &args.result) {
        let g = load_graph(ctx, &args.source)?;
        let truth = read_truth(&g, open(truth_path)?)?;
        let text = fs::read_to_string(result_path).with_context(|| format!("reading {}", result_path.display()))?;
        let result = cnss::detect::DetectionResult::from_json(&text)?;
        result.subgraph.validate(&g)?;
        let mut report = MetricReport::default();
        report.push(prf(&truth, &result.subgraph)?);
        return ctx.emit(args.out.as_deref(), |w| Ok(report.write_csv(w)?));
    }
    let Some(kind) = args.signal else {
        return Err(Failure::Usage(
            "evaluate needs --signal, or --truth with --result".into(),
        ));
    };
    if args.runs == 0 || args.true_size == 0 {
        return Err(Failure::Usage("--runs and --true-size must be at least 1".into()));
    }
    let s = setup(ctx, &args.source, &args.scoring)?;
    let searcher = Searcher::new(&s.g, s.mode)?;
    let table = build_table(ctx, &s.g, &args.source, &searcher, &s.grid, &args.scoring)?;
    let detector = Detector::with_searcher(searcher, &table, &s.grid, args.scoring.statistic)?;
    let mut report = MetricReport::default();
    for run in 0..args.runs {
        let (spec, p) = simulate(ctx, &s.g, kind, args.true_size, run)?;
        let found = detector.detect(&p)?;
        report.push(prf(&spec.truth, &found.subgraph)?);
    }
    ctx.emit(args.out.as_deref(), |w| Ok(report.write_csv(w)?))
}

pub fn power(ctx: &Context, args: PowerArgs) -> Result<(), Failure> {
    if args.runs == 0 || args.replicas == 0 || args.true_size == 0 {
        return Err(Failure::Usage(
            "--runs, --replicas and --true-size must be at least 1".into(),
        ));
    }
    if !(args.level > 0.0 && args.level <= 1.0) {
        return Err(Failure::Usage(format!("--level {} outside (0, 1]", args.level)));
    }
    if let Some(out) = &args.out {
        ctx.check_output(out)?;
    }
    let s = setup(ctx, &args.source, &args.scoring)?;
    let searcher = Searcher::new(&s.g, s.mode)?;
    let table = build_table(ctx, &s.g, &args.source, &searcher, &s.grid, &args.scoring)?;
    let detector = Detector::with_searcher(searcher, &table, &s.grid, args.scoring.statistic)?;
    let null = detector.null_scores(args.replicas, ctx.significance_seed())?;
    let alt = (0..args.runs)
        .map(|run| {
            let (_, p) = simulate(ctx, &s.g, args.signal, args.true_size, run)?;
            Ok(detector.max_score(&p)?)
        })
        .collect::<anyhow::Result<Vec<f64>>>()?;
    let power = detection_power(&alt, &null, args.level)?;
    ctx.emit(args.out.as_deref(), |w| {
        writeln!(w, "kind,index,score")?;
        for (i, x) in alt.iter().enumerate() {
            writeln!(w, "signal,{i},{x}")?;
        }
        for (i, x) in null.iter().enumerate() {
            writeln!(w, "null,{i},{x}")?;
        }
        Ok(())
    })?;
    eprintln!("detection power at level {}: {power}", args.level);
    Ok(())
}
