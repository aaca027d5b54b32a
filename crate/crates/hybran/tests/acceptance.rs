//! Acceptance suite. Criteria run one after another so their timings do not
//! interfere; each prints one PASS/FAIL line and the process fails if any does.

use std::f64::consts::PI;
use std::time::Instant;

use hybran::automaton::HybridAutomaton;
use hybran::dataset::holdout_split;
use hybran::dynamics::stream_rng;
use hybran::nn::Layer;
use hybran::pipeline::{fit_hybrid, fit_single, FitConfig, FitReport};
use hybran::reach::step_reach;
use hybran::{
    generate_traces, gradient_check, interval_forward, reach, split, Activation, Architecture, Fragment, HyperRect,
    LimitCycle, MergePolicy, NeuralNet, Partition, ReachConfig, ReachSet,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rect(b: &[(f64, f64)]) -> HyperRect {
    HyperRect::from_bounds(b).unwrap()
}

fn random_box(rng: &mut ChaCha8Rng, dim: usize, center: f64, max_width: f64) -> HyperRect {
    let b: Vec<(f64, f64)> = (0..dim)
        .map(|_| {
            let c = rng.gen_range(-center..center);
            let w = rng.gen_range(0.0..max_width);
            (c - w / 2.0, c + w / 2.0)
        })
        .collect();
    rect(&b)
}

fn sample_in(r: &HyperRect, rng: &mut ChaCha8Rng) -> Vec<f64> {
    r.lo()
        .iter()
        .zip(r.hi())
        .map(|(&l, &h)| if l < h { rng.gen_range(l..=h) } else { l })
        .collect()
}

fn c1_partition() -> Outcome {
    let t0 = Instant::now();
    let p = Partition::new(rect(&[(-4.0, 4.0), (-3.0, 3.0)]), &[4, 3]).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let cuts_ok = p.cut_points(0) == [-4.0, -2.0, 0.0, 2.0, 4.0] && p.cut_points(1) == [-3.0, -1.0, 1.0, 3.0];
    let vol: f64 = p.cells().iter().map(HyperRect::volume).sum();
    let rel = (vol - 48.0).abs() / 48.0;
    outcome(
        p.len() == 12 && cuts_ok && rel <= 1e-9 && secs < 1e-3,
        format!("{} cells, cuts exact: {cuts_ok}, volume rel err {rel:.1e}, {:.1} us", p.len(), secs * 1e6),
    )
}

fn c2_gradients() -> Outcome {
    let t0 = Instant::now();
    let mut rng = stream_rng(2, 0);
    let acts = [Activation::Tanh, Activation::Relu, Activation::Identity];
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let depth = rng.gen_range(1..=3);
        let mut sizes = vec![rng.gen_range(1..=5)];
        let mut activations = Vec::new();
        for l in 0..depth {
            sizes.push(rng.gen_range(1..=24));
            activations.push(if l + 1 == depth { Activation::Identity } else { acts[rng.gen_range(0..2)] });
        }
        let arch = Architecture::new(sizes.clone(), activations).unwrap();
        let net = NeuralNet::xavier(&arch, &mut rng);
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        worst = worst.max(gradient_check(&net, &x, &y).unwrap());
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(worst < 1e-4 && secs < 5.0, format!("max rel err {worst:.2e} over 20 nets, {secs:.2} s"))
}

struct SeedRun {
    seed: u64,
    hybrid: FitReport,
    single: FitReport,
    hybrid_mse: f64,
    single_mse: f64,
}

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn domain() -> HyperRect {
    rect(&[(-4.0, 4.0), (-PI, PI)])
}

fn run_seed(seed: u64) -> SeedRun {
    let system = LimitCycle::default();
    let traces = generate_traces(&system, 50, 150, &domain(), seed).unwrap();
    let (train, test) = holdout_split(&traces, 0.2).unwrap();
    let u_box = system.params.input_box();

    let mut hcfg = FitConfig::new(20);
    hcfg.train.seed = seed;
    let partition = Partition::new(domain(), &[4, 3]).unwrap();
    let hybrid = fit_hybrid(&train, partition, u_box.clone(), &hcfg).unwrap();

    let mut scfg = FitConfig::new(200);
    scfg.train.seed = seed;
    let single = fit_single(&train, domain(), u_box, &scfg).unwrap();

    SeedRun {
        seed,
        hybrid_mse: hybrid.automaton.evaluate_mse(&test).unwrap().mse,
        single_mse: single.automaton.evaluate_mse(&test).unwrap().mse,
        hybrid,
        single,
    }
}

fn c3_precision(runs: &[SeedRun], secs: f64) -> Outcome {
    for r in runs {
        println!(
            "    seed {}: hybrid mse {:.4} ({:.2} s), single mse {:.4} ({:.2} s)",
            r.seed, r.hybrid_mse, r.hybrid.wall_seconds, r.single_mse, r.single.wall_seconds
        );
    }
    let fixed = &runs[0];
    let wins = runs.iter().filter(|r| r.hybrid_mse <= r.single_mse).count();
    outcome(
        fixed.hybrid_mse <= 0.1 && fixed.single_mse <= 0.15 && wins >= 4 && secs < 300.0,
        format!(
            "seed {}: hybrid {:.4} <= 0.1, single {:.4} <= 0.15; hybrid better on {wins}/5 seeds; {secs:.1} s",
            fixed.seed, fixed.hybrid_mse, fixed.single_mse
        ),
    )
}

fn c4_training_time(runs: &[SeedRun]) -> Outcome {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let ratio = |r: &SeedRun| r.hybrid.wall_seconds / r.single.wall_seconds;
    let worst = runs.iter().map(ratio).fold(0.0, f64::max);
    let note = if threads < 4 {
        format!(" (only {threads} hardware thread(s); cells trained sequentially)")
    } else {
        String::new()
    };
    outcome(
        worst <= 0.5,
        format!("hybrid/single wall-clock ratio <= {worst:.3} on every seed{note}"),
    )
}

const REACH_INIT: [(f64, f64); 2] = [(-3.02, -3.0), (-2.603, -2.5)];

fn reach_query() -> (HyperRect, ReachConfig) {
    (rect(&REACH_INIT), ReachConfig::new(200, rect(&[(-1.3, 1.7)])))
}

fn c5_soundness(h: &HybridAutomaton) -> Outcome {
    let t0 = Instant::now();
    let (init, cfg) = reach_query();
    let set = reach(h, &init, &cfg).unwrap();
    let mut violations = 0usize;
    for i in 0..1000u64 {
        let mut rng = stream_rng(5, i);
        let x0 = sample_in(&init, &mut rng);
        let inputs: Vec<Vec<f64>> = (0..200).map(|_| sample_in(&cfg.input_box, &mut rng)).collect();
        let sim = h.simulate(&x0, &inputs).unwrap();
        violations += sim
            .trajectory
            .iter()
            .enumerate()
            .filter(|(k, x)| !set.contains(*k, x))
            .count();
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        violations == 0 && secs < 120.0,
        format!(
            "{violations} violations over 1000 runs x 201 states, {} fragments, {secs:.2} s",
            set.fragment_count()
        ),
    )
}

fn toy_automaton(rng: &mut ChaCha8Rng) -> HybridAutomaton {
    let segs = [[2, 1], [1, 2], [3, 1], [1, 3]][rng.gen_range(0..4)];
    let p = Partition::new(rect(&[(-2.0, 2.0), (-2.0, 2.0)]), &segs).unwrap();
    let arch = Architecture::shallow(3, 6, 2);
    let nets = (0..p.len()).map(|_| NeuralNet::xavier(&arch, rng)).collect();
    HybridAutomaton::assemble(p, nets, &[], rect(&[(-0.5, 0.5)])).unwrap()
}

fn c6_split_combine() -> Outcome {
    let t0 = Instant::now();
    let mut rng = stream_rng(6, 0);
    let mut worst_vol: f64 = 0.0;
    let mut escapes = 0usize;
    let mut points = 0usize;
    for _ in 0..100 {
        let h = toy_automaton(&mut rng);
        let b = random_box(&mut rng, 2, 2.5, 2.0);
        let s = split(&b, h.partition()).unwrap();
        let total: f64 = s.fragments.iter().map(|f| f.rect.volume()).sum();
        worst_vol = worst_vol.max((total - b.volume()).abs() / b.volume().max(f64::MIN_POSITIVE));

        let mut cfg = ReachConfig::new(1, h.input_box().clone());
        cfg.merge = MergePolicy::ExactUnion;
        let next = step_reach(&h, &s.fragments, h.input_box(), &cfg).unwrap().fragments;
        for f in &s.fragments {
            let (lo, hi) = (f.rect.lo(), f.rect.hi());
            for i in 0..100 {
                for j in 0..100 {
                    let x = [
                        lo[0] + (hi[0] - lo[0]) * i as f64 / 99.0,
                        lo[1] + (hi[1] - lo[1]) * j as f64 / 99.0,
                        rng.gen_range(-0.5..=0.5),
                    ];
                    let y = h.net(f.cell).forward(&x).unwrap();
                    points += 1;
                    if !next.iter().any(|g: &Fragment| g.rect.contains(&y)) {
                        escapes += 1;
                    }
                }
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        escapes == 0 && worst_vol <= 1e-9 && secs < 60.0,
        format!("{escapes} of {points} grid images escaped, volume rel err {worst_vol:.1e}, {secs:.2} s"),
    )
}

fn c7_interval() -> Outcome {
    let t0 = Instant::now();
    let mut rng = stream_rng(7, 0);
    let arch = Architecture::shallow(3, 20, 2);
    let mut escapes = 0usize;
    for _ in 0..10 {
        let net = NeuralNet::xavier(&arch, &mut rng);
        let b = random_box(&mut rng, 3, 3.0, 2.0);
        let out = interval_forward(&net, &b).unwrap();
        for _ in 0..100_000 {
            let y = net.forward(&sample_in(&b, &mut rng)).unwrap();
            if !out.contains(&y) {
                escapes += 1;
            }
        }
    }
    let mut nonmonotone = 0usize;
    for _ in 0..100 {
        let net = NeuralNet::xavier(&arch, &mut rng);
        let outer = random_box(&mut rng, 3, 3.0, 2.0);
        let a = sample_in(&outer, &mut rng);
        let b = sample_in(&outer, &mut rng);
        let lo: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p.min(*q)).collect();
        let hi: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p.max(*q)).collect();
        let inner = HyperRect::new(lo, hi).unwrap();
        let fo = interval_forward(&net, &outer).unwrap();
        let fi = interval_forward(&net, &inner).unwrap();
        if !fo.contains_rect(&fi) {
            nonmonotone += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        escapes == 0 && nonmonotone == 0 && secs < 30.0,
        format!("{escapes} of 1e6 samples escaped, {nonmonotone} of 100 nested pairs non-monotone, {secs:.2} s"),
    )
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn c8_reach_timing(run: &SeedRun) -> Outcome {
    let (init, cfg) = reach_query();
    let hybrid = reach(&run.hybrid.automaton, &init, &cfg).unwrap();
    let single = reach(&run.single.automaton, &init, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let emit = |name: &str, set: &ReachSet| -> std::io::Result<usize> {
        let path = dir.path().join(name);
        set.write_timing_csv(std::fs::File::create(&path)?)?;
        Ok(std::fs::read_to_string(&path)?.lines().count())
    };
    let emitted = matches!(emit("hybrid.timing.csv", &hybrid), Ok(202)) && matches!(emit("single.timing.csv", &single), Ok(202));
    let (th, ts) = (mean(&hybrid.step_seconds[1..]), mean(&single.step_seconds[1..]));
    let tighter = (0..=200).filter(|&k| hybrid.volume(k) <= single.volume(k)).count();
    println!(
        "    mean step time hybrid {:.2} us vs single {:.2} us (hybrid lower: {}); hybrid area <= single on {tighter}/201 steps",
        th * 1e6,
        ts * 1e6,
        th < ts
    );
    outcome(emitted, format!("timing CSVs emitted: {emitted} (201 steps each)"))
}

fn c9_degenerate() -> Outcome {
    let t0 = Instant::now();
    let mut rng = stream_rng(9, 0);
    let h = {
        let p = Partition::new(domain(), &[4, 3]).unwrap();
        let arch = Architecture::shallow(3, 20, 2);
        // contractive nets keep the trajectory in a bounded region
        let nets = (0..p.len())
            .map(|_| {
                let n = NeuralNet::xavier(&arch, &mut rng);
                let mut layers = n.layers().to_vec();
                let last = layers.pop().unwrap();
                let w: Vec<Vec<f64>> = (0..last.rows()).map(|r| last.row(r).iter().map(|v| v * 0.5).collect()).collect();
                layers.push(Layer::new(w, last.bias().to_vec(), Activation::Identity).unwrap());
                NeuralNet::new(layers).unwrap()
            })
            .collect();
        HybridAutomaton::assemble(p, nets, &[], rect(&[(-1.3, 1.7)])).unwrap()
    };
    let x0 = [-3.01, -2.55];
    let u = [0.3];
    let set = reach(&h, &HyperRect::point(&x0).unwrap(), &ReachConfig::new(50, HyperRect::point(&u).unwrap())).unwrap();
    let sim = h.simulate(&x0, &vec![u.to_vec(); 50]).unwrap();
    let mismatches = (0..=50)
        .filter(|&k| {
            let f = &set.steps[k];
            !(f.len() == 1 && f[0].rect.lo() == sim.trajectory[k].as_slice() && f[0].rect.hi() == sim.trajectory[k].as_slice())
        })
        .count();
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && secs < 1.0,
        format!("{mismatches} of 51 steps differ from simulation, {:.1} ms", secs * 1e3),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!("criterion {n} {:<4} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };

    report(1, "partition exactness", c1_partition());
    report(2, "gradient correctness", c2_gradients());

    let t0 = Instant::now();
    let runs: Vec<SeedRun> = SEEDS.iter().map(|&s| run_seed(s)).collect();
    let secs = t0.elapsed().as_secs_f64();
    report(3, "modeling precision", c3_precision(&runs, secs));
    report(4, "training-time advantage", c4_training_time(&runs));
    report(5, "reach soundness", c5_soundness(&runs[0].hybrid.automaton));
    report(6, "split/combine oracle", c6_split_combine());
    report(7, "interval propagation soundness", c7_interval());
    report(8, "reach timing comparison", c8_reach_timing(&runs[0]));
    report(9, "degenerate-reach equivalence", c9_degenerate());

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("all 9 acceptance criteria passed");
    } else {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
