//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bitflip_core::dot_fault::classify::{classify_value, threshold_exponent};
use bitflip_core::dot_fault::table::{outcome, product_scale};
use bitflip_core::float_anatomy::EXPONENT_BIAS;
use bitflip_core::gmres::{analyze, gmres_solve, Analysis, GmresConfig};
use bitflip_core::monte_carlo::{run_surface, McConfig, McSurface};
use bitflip_core::sparse::{equilibrate, gen_poisson, norms, CsrMatrix};
use bitflip_core::{
    decompose, enumerate_dot_errors, enumerate_perturbations, flip_bit, predict_bit_failure, reconstruct, BitIndex,
    ErrorClass, ErrorLookupTable,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

struct Shared {
    table: Option<ErrorLookupTable>,
    floor_surface: Option<McSurface>,
    equilibrated_run: Option<Analysis>,
}

impl Shared {
    fn table(&mut self) -> &ErrorLookupTable {
        self.table.get_or_insert_with(ErrorLookupTable::build)
    }

    fn floor_surface(&mut self) -> &McSurface {
        self.floor_surface.get_or_insert_with(|| {
            let cfg = McConfig {
                vector_length: 100,
                samples_per_cell: 100,
                magnitude_grid: (-10..=0).collect(),
                failure_threshold: 1.0,
                seed: 20_170_529,
            };
            run_surface(&cfg).expect("surface")
        })
    }

    fn equilibrated_run(&mut self) -> &Analysis {
        if self.equilibrated_run.is_none() {
            let a = gen_poisson(100).unwrap();
            let run = analyze(&a, &GmresConfig::default(), true, self.table()).expect("analysis");
            self.equilibrated_run = Some(run);
        }
        self.equilibrated_run.as_ref().unwrap()
    }
}

fn floor_exact(sh: &mut Shared) -> Verdict {
    let s = sh.floor_surface();
    let off: Vec<String> = s
        .cells
        .iter()
        .filter(|c| c.probability() != 0.015625)
        .map(|c| format!("({},{})={:.6}", c.mag_u, c.mag_v, c.probability()))
        .collect();
    let n = s.cells.len();
    if off.is_empty() {
        verdict(true, format!("all {n} cells exactly 0.015625"))
    } else {
        verdict(false, format!("{} of {n} cells differ from 0.015625: {}", off.len(), off.join(" ")))
    }
}

fn per_bit_attribution(sh: &mut Shared) -> Verdict {
    let s = sh.floor_surface();
    let mut offenders = Vec::new();
    for &m in &s.config.magnitude_grid {
        let cell = s.cell(m, m).unwrap();
        for (bit, &f) in cell.per_bit.iter().enumerate() {
            if bit != 62 && f > 0 {
                offenders.push(format!("mag {m} bit {bit}: {f}"));
            }
        }
        if cell.per_bit[62] == 0 {
            offenders.push(format!("mag {m} bit 62 never fails"));
        }
    }
    if offenders.is_empty() {
        verdict(true, "bit 62 is the only failing bit on the diagonal -10..=0")
    } else {
        verdict(false, format!("other bits fail: {}", offenders.join("; ")))
    }
}

fn perturbation_sets() -> Verdict {
    // Printed exponent-flip values, bits 52..=62; None marks zero.
    let printed: [(f64, [Option<i32>; 11]); 6] = [
        (2.0, [2, 3, 5, 9, 17, 33, 65, 129, 257, 513, i32::MIN].map(nz)),
        (4.0, [1, 4, 6, 10, 18, 34, 66, 130, 258, 514, -1020].map(nz)),
        (8.0, [4, 1, 7, 11, 19, 35, 67, 131, 259, 515, -1018].map(nz)),
        (0.5, [0, -3, -5, -9, -17, -33, -65, -129, -257, -513, 1022].map(nz)),
        (0.25, [-3, 0, -6, -10, -18, -34, -66, -130, -258, -514, 1019].map(nz)),
        (0.125, [-2, -1, -7, -11, -19, -35, -67, -131, -259, -515, 1017].map(nz)),
    ];
    // entries that disagree with the bit pattern; checked against flip_bit
    let typos = [(4.0, 62), (8.0, 62), (0.5, 62), (0.25, 62), (0.125, 62)];
    let mut bad = Vec::new();
    let mut checked = 0;
    for (x, values) in printed {
        let recs = enumerate_perturbations(x).unwrap();
        for (k, expected) in values.iter().enumerate() {
            let bit = 52 + k as u32;
            let rec = &recs[bit as usize];
            let oracle = flip_bit(x, BitIndex::new(bit).unwrap());
            let want = if typos.contains(&(x, bit)) {
                oracle
            } else {
                expected.map_or(0.0, |e| 2f64.powi(e))
            };
            let err_ok = rec.abs_error.magnitude().and_then(|w| w.to_f64()) == Some((x - oracle).abs());
            if rec.perturbed.to_bits() != want.to_bits() || !err_ok {
                bad.push(format!("x={x} bit {bit}: got {:e}, want {want:e}", rec.perturbed));
            }
            checked += 1;
        }
    }
    if bad.is_empty() {
        verdict(true, format!("{checked} exponent flips match ({} typo entries via flip_bit)", typos.len()))
    } else {
        verdict(false, bad.join("; "))
    }
}

fn nz(e: i32) -> Option<i32> {
    (e != i32::MIN).then_some(e)
}

fn poisson_facts() -> Verdict {
    let a = gen_poisson(100).unwrap();
    let n = norms(&a).unwrap();
    let (s, _) = equilibrate(&a).unwrap();
    let ns = norms(&s).unwrap();
    let checks = [
        ("rows", a.n_rows() == 10_000, a.n_rows().to_string()),
        ("nnz", a.nnz() == 49_600, a.nnz().to_string()),
        ("inf", n.inf_norm == 8.0, n.inf_norm.to_string()),
        ("two", (n.two_norm_estimate - 7.999).abs() <= 1e-3, format!("{:.6}", n.two_norm_estimate)),
        ("fro", (n.frobenius_norm - 446.0).abs() <= 0.005 * 446.0, format!("{:.3}", n.frobenius_norm)),
        ("eq inf", ns.inf_norm == 2.0, ns.inf_norm.to_string()),
        ("eq two", (ns.two_norm_estimate - 1.999).abs() <= 1e-3, format!("{:.6}", ns.two_norm_estimate)),
    ];
    let detail = checks.iter().map(|(k, ok, v)| format!("{k}={v}{}", if *ok { "" } else { "(!)" })).collect::<Vec<_>>();
    verdict(checks.iter().all(|c| c.1), detail.join(" "))
}

fn shares_line(run: &Analysis) -> String {
    let t = run.report.tally.as_ref().unwrap();
    let s = t.shares();
    format!(
        "class1={:.4} class2={:.4} class3={:.4} class4={:.4} (total {}, {} iterations, threshold {:.6})",
        s[0],
        s[1],
        s[2],
        s[3],
        t.total(),
        run.report.iterations,
        run.threshold
    )
}

fn gmres_shares(sh: &mut Shared) -> Verdict {
    let run = sh.equilibrated_run();
    let t = run.report.tally.as_ref().unwrap();
    let c1 = t.share(ErrorClass::Small);
    let c2 = t.share(ErrorClass::Grey);
    let c4 = t.share(ErrorClass::NonNumeric);
    let pass = (0.88..=0.94).contains(&c1) && (0.06..=0.12).contains(&c4) && c2 < 0.01;
    verdict(pass, shares_line(run))
}

/// Poisson100 with every row multiplied by `factor`.
fn mis_scaled_poisson(factor: f64) -> CsrMatrix {
    let a = gen_poisson(100).unwrap();
    let f = vec![factor; a.n_rows()];
    a.scale_rows(&f).unwrap()
}

fn scaling_direction(sh: &mut Shared) -> Verdict {
    let a = mis_scaled_poisson(1e6);
    let cfg = GmresConfig::default();
    let raw = analyze(&a, &cfg, false, sh.table()).expect("mis-scaled run");
    let eq = analyze(&a, &cfg, true, sh.table()).expect("equilibrated run");
    let (tr, te) = (raw.report.tally.unwrap(), eq.report.tally.unwrap());
    let pass = te.share(ErrorClass::Small) > tr.share(ErrorClass::Small) && te.share(ErrorClass::Grey) < tr.share(ErrorClass::Grey);
    let raw = Analysis { report: bitflip_core::GmresReport { tally: Some(tr), ..raw.report }, ..raw };
    let eq = Analysis { report: bitflip_core::GmresReport { tally: Some(te), ..eq.report }, ..eq };
    verdict(pass, format!("mis-scaled: {} | equilibrated: {}", shares_line(&raw), shares_line(&eq)))
}

fn model_agreement() -> Verdict {
    let m = 10_000;
    let cfg = McConfig {
        vector_length: 10,
        samples_per_cell: m,
        magnitude_grid: (-2..=2).collect(),
        failure_threshold: 1.0,
        seed: 7,
    };
    let s = run_surface(&cfg).unwrap();
    let tol = 3.0 / (m as f64).sqrt();
    let mut worst = (0.0f64, String::new());
    let mut bad = 0;
    for c in &s.cells {
        for bit in BitIndex::exponent_bits() {
            let b = bit.index() as usize;
            let mc = c.bit_probability(b);
            let model = predict_bit_failure(c.mag_u, c.mag_v, bit, cfg.failure_threshold);
            let d = (mc - model).abs();
            if d > tol {
                bad += 1;
            }
            if d > worst.0 {
                worst = (d, format!("cell ({},{}) bit {b}: mc {mc:.4} model {model:.4}", c.mag_u, c.mag_v));
            }
        }
    }
    verdict(
        bad == 0,
        format!("{bad} of {} comparisons outside {tol}; worst |diff| {:.5} at {}", s.cells.len() * 11, worst.0, worst.1),
    )
}

fn random_operand(rng: &mut ChaCha8Rng) -> f64 {
    let sign = if rng.random::<bool>() { -1.0 } else { 1.0 };
    let mant = rng.random::<u64>() & ((1 << 52) - 1);
    let exp: i32 = match rng.random_range(0..20) {
        0 => return 0.0,
        1 => return sign * f64::from_bits(rng.random_range(1..1u64 << 52)),
        2 => rng.random_range(-1022..=1023),
        3 => rng.random_range(990..=1023),
        _ => rng.random_range(-12..=12),
    };
    sign * f64::from_bits((((exp + EXPONENT_BIAS) as u64) << 52) | mant)
}

fn oracle_equivalence(sh: &mut Shared) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = Vec::new();
    let mut compared = 0u64;
    for case in 0..200 {
        let n = rng.random_range(1..=4);
        let a: Vec<f64> = (0..n).map(|_| random_operand(&mut rng)).collect();
        let b: Vec<f64> = (0..n).map(|_| random_operand(&mut rng)).collect();
        let threshold = if rng.random::<bool>() { rng.random_range(1.0..16.0) } else { 2f64.powi(rng.random_range(0..40)) };
        let t = threshold_exponent(threshold);
        let Ok(recs) = enumerate_dot_errors(&a, &b) else { continue };
        for p in recs {
            let (ea, eb) = (decompose(a[p.index]).biased_exponent, decompose(b[p.index]).biased_exponent);
            let brute = classify_value(&p.record.abs_error, threshold);
            let table = outcome(ea, eb, p.site, p.record.bit).class(product_scale(ea, eb), t);
            compared += 1;
            if table.severity() < brute.severity() {
                mismatches.push(format!(
                    "case {case}: a={:e} b={:e} {:?} bit {} table {:?} brute {:?}",
                    a[p.index],
                    b[p.index],
                    p.site,
                    p.record.bit.index(),
                    table,
                    brute
                ));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut involution_bad = 0;
    let mut roundtrip_bad = 0;
    for _ in 0..1_000_000 {
        let x = f64::from_bits(rng.random());
        let bit = BitIndex::new(rng.random_range(0..64)).unwrap();
        if flip_bit(flip_bit(x, bit), bit).to_bits() != x.to_bits() {
            involution_bad += 1;
        }
        if reconstruct(&decompose(x)).to_bits() != x.to_bits() {
            roundtrip_bad += 1;
        }
    }

    let run = sh.equilibrated_run().clone();
    let a = gen_poisson(100).unwrap();
    let (s, sc) = equilibrate(&a).unwrap();
    let b = bitflip_core::gmres::build_rhs(&a, &GmresConfig::default().rhs).unwrap();
    let b = bitflip_core::sparse::apply_scaling_to_rhs(&b, &sc).unwrap();
    let plain = gmres_solve(&s, &b, &GmresConfig::default(), None).unwrap();
    let bits = |h: &[f64]| h.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let identical = bits(&plain.residual_history) == bits(&run.report.residual_history)
        && bits(&plain.x) == bits(&run.report.x);

    let pass = mismatches.is_empty() && involution_bad == 0 && roundtrip_bad == 0 && identical;
    let mut detail = format!(
        "table vs brute force: {} optimistic of {compared}; involution failures {involution_bad}/1e6; round-trip failures {roundtrip_bad}/1e6; instrumentation non-interference {}",
        mismatches.len(),
        if identical { "bitwise identical" } else { "DIFFERS" }
    );
    if let Some(first) = mismatches.first() {
        detail.push_str(&format!("; first: {first}"));
    }
    verdict(pass, detail)
}

fn main() {
    let mut sh = Shared { table: None, floor_surface: None, equilibrated_run: None };
    type Check = fn(&mut Shared) -> Verdict;
    let criteria: [(&str, Check); 8] = [
        ("1/64 floor (exact)", floor_exact),
        ("per-bit attribution", per_bit_attribution),
        ("perturbation sets", |_| perturbation_sets()),
        ("Poisson matrix facts", |_| poisson_facts()),
        ("GMRES class shares", gmres_shares),
        ("scaling is never detrimental", scaling_direction),
        ("model-MC agreement", |_| model_agreement()),
        ("oracle equivalence", oracle_equivalence),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let start = Instant::now();
        let v = check(&mut sh);
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {} {status} {name} [{:.1}s]: {}", i + 1, start.elapsed().as_secs_f64(), v.detail);
        if !v.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
