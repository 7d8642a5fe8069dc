//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! tolerance is missed. Elapsed time is reported next to each time budget.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use qw5::localization::decay_probe_with;
use qw5::spectral::{three_state_check, wrap_phase};
use qw5::{
    band_functions, band_surface, eigendecompose, evolve_step, fourier_step_operator,
    initial_state, limiting_distribution, probability_grid, reconstruction_error,
    time_averaged_probability, Chirality, MomentumPoint, MomentumProfile, QuadratureGrid,
    SpectralTable, Spinor, Walk,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn basis_l() -> Spinor {
    Spinor::basis(Chirality::L)
}

fn random_k(rng: &mut ChaCha8Rng) -> MomentumPoint {
    MomentumPoint::wrapped(rng.random_range(-PI..PI), rng.random_range(-PI..PI))
}

fn one_step() -> Outcome {
    let state = evolve_step(&initial_state(basis_l()).unwrap());
    let grid = probability_grid(&state);
    let expected = |n: (i64, i64)| match n {
        (-1, 0) => 9.0 / 25.0,
        (1, 0) | (0, 0) | (0, -1) | (0, 1) => 4.0 / 25.0,
        _ => 0.0,
    };
    let worst = grid
        .iter()
        .map(|(n, p)| (p - expected(n)).abs())
        .fold(0.0, f64::max);
    outcome(
        worst < 1e-15,
        format!("max deviation {worst:.3e} (< 1e-15)"),
    )
}

fn norm_conservation() -> Outcome {
    let mut worst = 0.0f64;
    for c in Chirality::ALL {
        let start = initial_state(Spinor::basis(c)).unwrap();
        Walk::grover().run(start, 1000, |s| worst = worst.max((s.mass() - 1.0).abs()));
    }
    outcome(
        worst < 1e-10,
        format!("max |mass - 1| over 5 x 1000 steps {worst:.3e} (< 1e-10)"),
    )
}

fn flat_band() -> Outcome {
    match band_surface(128) {
        Ok(rows) => {
            let worst = rows
                .iter()
                .map(|r| {
                    r.phases
                        .iter()
                        .map(|t| t.abs())
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max);
            outcome(
                worst < 1e-10,
                format!("max_k min_j |theta_j| on 128x128 = {worst:.3e} (< 1e-10)"),
            )
        }
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn three_state() -> Outcome {
    match three_state_check(1000) {
        Ok(r) => outcome(
            r.cos < 1e-10 && r.sin < 1e-10,
            format!(
                "cos residual {:.3e}, sin residual {:.3e} (< 1e-10)",
                r.cos, r.sin
            ),
        ),
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn two_paths() -> Outcome {
    let err = |n| reconstruction_error(basis_l(), 8, 8, &QuadratureGrid::new(n).unwrap());
    match (err(256), err(512)) {
        (Ok(e256), Ok(e512)) => outcome(
            e256 < 1e-3 && e512 <= e256,
            format!("error n=256 {e256:.10e} (< 1e-3), n=512 {e512:.10e} (<= n=256)"),
        ),
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("error: {e}")),
    }
}

fn decay() -> Outcome {
    let table = match SpectralTable::build(&QuadratureGrid::new(256).unwrap()) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for c in Chirality::ALL {
        let profile = MomentumProfile::Localized(Spinor::basis(c));
        match decay_probe_with(&table, &profile, (0, 0), &[25, 400]) {
            Ok(s) => {
                let ratio = s.magnitudes[1] / s.magnitudes[0];
                pass &= s.magnitudes[1] < s.magnitudes[0] / 3.0;
                parts.push(format!("{c} {ratio:.4}"));
            }
            Err(e) => return outcome(false, format!("error: {e}")),
        }
    }
    outcome(
        pass,
        format!("magnitude(400)/magnitude(25): {} (< 1/3)", parts.join(", ")),
    )
}

fn localization() -> Outcome {
    let limit = |n| {
        limiting_distribution(basis_l(), &QuadratureGrid::new(n).unwrap(), 0).map(|g| g.get(0, 0))
    };
    let (p128, p256) = match (limit(128), limit(256)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return outcome(false, format!("error: {e}")),
    };
    let avg = match time_averaged_probability(basis_l(), 500, 0) {
        Ok(g) => g.get(0, 0),
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    let gap = (avg - p256).abs() / p256;
    let delta = (p256 - p128).abs();
    outcome(
        gap < 0.05 && p256 > 10.0 * delta,
        format!(
            "P_inf(0,0) {p256:.10}, time average {avg:.10}, relative gap {gap:.4} (< 0.05), \
             refinement delta {delta:.3e} (P_inf > 10x)"
        ),
    )
}

fn printed_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let worst = (0..1000)
        .map(|_| {
            let f = band_functions(random_k(&mut rng));
            (f.d + f.c).abs()
        })
        .fold(0.0, f64::max);
    let c = band_functions(MomentumPoint::new(PI, 0.0).unwrap()).c;
    let pass = worst < 1e-12 && (c + 72.0).abs() < 1e-12;
    outcome(
        pass,
        format!("max |D + C| {worst:.3e} (< 1e-12), C(pi,0) = {c} (-72 within 1e-12)"),
    )
}

fn sorted_phases(k: MomentumPoint) -> qw5::Result<[f64; 5]> {
    Ok(eigendecompose(&fourier_step_operator(k))?.phases)
}

fn conjugation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let k = random_k(&mut rng);
        let (here, there) = match (sorted_phases(k), sorted_phases(k.negated())) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return outcome(false, format!("error: {e}")),
        };
        let mut mirrored = here.map(|t| wrap_phase(-t));
        mirrored.sort_by(f64::total_cmp);
        for (a, b) in mirrored.iter().zip(&there) {
            worst = worst.max(wrap_phase(a - b).abs());
        }
    }
    outcome(
        worst < 1e-10,
        format!("max phase mismatch over 500 k {worst:.3e} (< 1e-10)"),
    )
}

const CLI_RUNS: [&[&str]; 9] = [
    &["evolve", "--steps", "30"],
    &["evolve", "--steps", "12", "--format", "pgm"],
    &["spectrum", "--kgrid", "24", "--format", "json"],
    &["limit", "--kgrid", "64", "--radius", "4"],
    &["timeavg", "--steps", "60", "--radius", "4"],
    &[
        "decay", "--kgrid", "64", "--times", "0,25,100", "--site", "1,-1",
    ],
    &["verdict", "--kgrid", "64", "--steps", "120"],
    &["search", "--kgrid", "24", "--samples", "40", "--seed", "7"],
    &["spectrum", "--kgrid", "16"],
];

fn run_cli(args: &[&str], out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_qw5"))
        .args(args)
        .arg("--out")
        .arg(out)
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("`{}` exited with {status}", args.join(" ")));
    }
    std::fs::read(out).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    for (i, args) in CLI_RUNS.iter().enumerate() {
        let first = run_cli(args, &dir.path().join(format!("{i}a")));
        let second = run_cli(args, &dir.path().join(format!("{i}b")));
        match (first, second) {
            (Ok(a), Ok(b)) if a == b => {}
            (Ok(_), Ok(_)) => {
                return outcome(
                    false,
                    format!("`{}` output differs between runs", args.join(" ")),
                )
            }
            (Err(e), _) | (_, Err(e)) => return outcome(false, e),
        }
    }
    outcome(
        true,
        format!(
            "{} invocations covering all subcommands byte-identical on rerun",
            CLI_RUNS.len()
        ),
    )
}

type Criterion = (&'static str, u64, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("one-step exactness", 1, one_step),
        ("norm conservation", 60, norm_conservation),
        ("flat band", 10, flat_band),
        ("three-state closed form", 5, three_state),
        ("two-path oracle equivalence", 300, two_paths),
        ("dispersive decay", 300, decay),
        ("localization cross-check", 600, localization),
        ("printed-formula identity", 1, printed_identity),
        ("conjugation symmetry", 5, conjugation),
        ("CLI determinism", 60, determinism),
    ];
    let mut passed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let timing = if elapsed <= Duration::from_secs(*budget) {
            format!("{:.2} s, budget {budget} s", elapsed.as_secs_f64())
        } else {
            format!("{:.2} s, OVER budget {budget} s", elapsed.as_secs_f64())
        };
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2} {name}: {} [{timing}]", i + 1, result.detail);
        passed += usize::from(result.pass);
    }
    println!("acceptance: {passed}/{} criteria passed", criteria.len());
    if passed != criteria.len() {
        std::process::exit(1);
    }
}
