//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each and exits non-zero if any failed.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use gcgan::config::RunConfig;
use gcgan::toy::{make_toy, recolor_pixel, write_toy, ToyKind, TOY_SIZE};
use gcgan::{checkpoint, log, run};
use gcgan_core::autograd::{ParamKey, Tape, Var};
use gcgan_core::data::{image_from_interleaved, precompute_distance_stats, EpochPlan, PlanSpec, UnpairedData};
use gcgan_core::eval::{aggregate_score, segmentation_scores, SegScores};
use gcgan_core::losses::*;
use gcgan_core::models::{DiscriminatorSpec, GeneratorSpec, Network, Role, SharingMode};
use gcgan_core::training::{lr_at, Constraints, ImageBuffer, TrainConfig, Trainer};
use gcgan_core::{Error as CoreError, GeoTransform, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || format!("{what}: got {got}, want {want} (tol {tol:e})"))
}

fn random_image(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_, _, _, _| rng.random_range(-1.0..1.0))
}

// ---------------------------------------------------------------- 1

/// Index oracle for the five transforms, written from their definitions.
fn oracle(t: GeoTransform, x: &Tensor<f64>) -> Tensor<f64> {
    let [n, c, h, w] = x.shape();
    let (oh, ow) = if matches!(t, GeoTransform::Rot90Cw | GeoTransform::Rot270Cw) { (w, h) } else { (h, w) };
    Tensor::from_fn([n, c, oh, ow], |b, ch, i, j| match t {
        GeoTransform::Identity => x.at(b, ch, i, j),
        GeoTransform::VFlip => x.at(b, ch, h - 1 - i, j),
        GeoTransform::Rot90Cw => x.at(b, ch, h - 1 - j, i),
        GeoTransform::Rot180 => x.at(b, ch, h - 1 - i, w - 1 - j),
        GeoTransform::Rot270Cw => x.at(b, ch, j, w - 1 - i),
        _ => unreachable!(),
    })
}

fn criterion_1() -> Outcome {
    use GeoTransform::*;
    let five = [Identity, VFlip, Rot90Cw, Rot180, Rot270Cw];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checks = 0;
    for size in [5, 8] {
        for _ in 0..10 {
            let x = random_image(&mut rng, [1, 3, size, size]);
            let eq = |a: &Tensor<f64>, b: &Tensor<f64>| a.shape() == b.shape() && a.data() == b.data();
            for t in five {
                ensure(eq(&t.apply(&x), &oracle(t, &x)), || format!("{t} disagrees with the index oracle"))?;
                ensure(eq(&t.inverse().apply(&t.apply(&x)), &x), || format!("inverse of {t} does not undo it"))?;
                checks += 2;
            }
            let r4 = (0..4).fold(x.clone(), |z, _| Rot90Cw.apply(&z));
            ensure(eq(&r4, &x), || "rot90 applied four times is not the identity".into())?;
            ensure(eq(&VFlip.apply(&VFlip.apply(&x)), &x), || "vflip twice is not the identity".into())?;
            checks += 2;
            for a in five {
                for b in five {
                    let ab = a.compose(b);
                    ensure(eq(&ab.apply(&x), &a.apply(&b.apply(&x))), || format!("{a}∘{b} does not act as composition"))?;
                    for c in five {
                        ensure(ab.compose(c) == a.compose(b.compose(c)), || format!("({a}∘{b})∘{c} not associative"))?;
                        let lhs = ab.compose(c).apply(&x);
                        let rhs = a.apply(&b.apply(&c.apply(&x)));
                        ensure(eq(&lhs, &rhs), || format!("({a}∘{b})∘{c} acts differently on arrays"))?;
                        checks += 2;
                    }
                    checks += 1;
                }
            }
        }
    }
    Ok(format!("{checks} bit-exact checks on 3x5x5 and 3x8x8"))
}

// ---------------------------------------------------------------- 2

fn scalar(tape: &Tape<f64>, v: Var) -> f64 {
    tape.value(v).item()
}

fn criterion_2() -> Outcome {
    let tol = 1e-6;
    let mut n = 0;
    let mut t = Tape::<f64>::new();
    let shape = [2, 1, 3, 3];

    for (s, want) in [(0.5, 0.25), (1.0, 0.0), (0.0, 1.0)] {
        let v = t.constant(Tensor::full(shape, s));
        let l = adversarial_loss_g(&mut t, v);
        close(&format!("adversarial_g({s})"), scalar(&t, l), want, tol)?;
        n += 1;
    }
    for (r, f, want) in [(1.0, 0.0, 0.0), (0.5, 0.5, 0.25), (0.0, 1.0, 1.0)] {
        let (vr, vf) = (t.constant(Tensor::full(shape, r)), t.constant(Tensor::full(shape, f)));
        let l = adversarial_loss_d(&mut t, vr, vf);
        close(&format!("adversarial_d({r}, {f})"), scalar(&t, l), want, tol)?;
        n += 1;
    }

    let id = |_: &mut Tape<f64>, x: Var| x;
    let twice = |tp: &mut Tape<f64>, x: Var| tp.scale(x, 2.0);
    let half = |tp: &mut Tape<f64>, x: Var| tp.scale(x, 0.5);
    let plus_half = |tp: &mut Tape<f64>, x: Var| tp.offset(x, 0.5);
    let plus_tenth = |tp: &mut Tape<f64>, x: Var| tp.offset(x, 0.1);
    let negate = |tp: &mut Tape<f64>, x: Var| tp.scale(x, -1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    let x = t.constant(random_image(&mut rng, [2, 3, 4, 4]));
    let g = geometry_consistency_loss(&mut t, &id, &id, x, GeoTransform::VFlip).map_err(|e| e.to_string())?;
    close("geometry, identity translators", scalar(&t, g.terms.loss), 0.0, tol)?;
    let net = Network::<f64>::generator(small_generator(8), 3).map_err(|e| e.to_string())?;
    let xg = t.constant(random_image(&mut rng, [1, 3, 8, 8]));
    let b = Bound { net: &net, id: 0, trainable: true };
    let g = geometry_consistency_loss(&mut t, &b, &b, xg, GeoTransform::Identity).map_err(|e| e.to_string())?;
    close("geometry, f = identity with shared weights", scalar(&t, g.terms.loss), 0.0, tol)?;
    let ones = t.constant(Tensor::full([1, 1, 2, 2], 1.0));
    let g = geometry_consistency_loss(&mut t, &id, &twice, ones, GeoTransform::Rot90Cw).map_err(|e| e.to_string())?;
    close("geometry hand example, first term", scalar(&t, g.terms.inverse), 1.0, tol)?;
    close("geometry hand example, second term", scalar(&t, g.terms.forward), 1.0, tol)?;
    close("geometry hand example, total", scalar(&t, g.terms.loss), 2.0, tol)?;
    n += 5;

    let (cx, cy) = (t.constant(random_image(&mut rng, [2, 3, 4, 4])), t.constant(random_image(&mut rng, [2, 3, 4, 4])));
    let c = cycle_consistency_loss(&mut t, &id, Some(&id), cx, cy).map_err(|e| e.to_string())?;
    close("cycle, identity translators", scalar(&t, c), 0.0, tol)?;
    let zeros = t.constant(Tensor::zeros([1, 3, 4, 4]));
    let c = cycle_consistency_loss(&mut t, &plus_half, Some(&id), zeros, zeros).map_err(|e| e.to_string())?;
    close("cycle, G_XY = x + 0.5", scalar(&t, c), 1.0, tol)?;
    let c = cycle_consistency_loss(&mut t, &twice, Some(&half), cx, cy).map_err(|e| e.to_string())?;
    close("cycle, exact inverse", scalar(&t, c), 0.0, tol)?;
    ensure(cycle_consistency_loss(&mut t, &id, None, cx, cy).is_err(), || "cycle without G_YX accepted".into())?;
    n += 4;

    let (xi, xj) = (t.constant(random_image(&mut rng, [3, 3, 4, 4])), t.constant(random_image(&mut rng, [3, 3, 4, 4])));
    let same = DistanceStats::new(0.7, 0.2, 0.7, 0.2);
    let d = distance_loss(&mut t, &id, xi, xj, &same).map_err(|e| e.to_string())?;
    close("distance, identity with matching stats", scalar(&t, d), 0.0, tol)?;
    let a = Tensor::<f64>::zeros([1, 3, 4, 4]);
    let bb = Tensor::<f64>::full([1, 3, 4, 4], 0.3);
    for sigma in [0.01, 1.0, 50.0] {
        let s = DistanceStats::new(0.3, sigma, 0.0, 1.0);
        close("distance, centering", s.standardize_x(image_distance(&a, &bb)).map_err(|e| e.to_string())?, 0.0, tol)?;
    }
    n += 4;
    // Three images, G doubles its input; stats from all three pairs.
    let imgs: Vec<Tensor<f64>> = (0..3).map(|_| random_image(&mut rng, [1, 3, 4, 4])).collect();
    let doubled: Vec<Tensor<f64>> = imgs.iter().map(|i| i.map(|v| 2.0 * v)).collect();
    let stats = precompute_distance_stats(&imgs, &doubled, 10, 0).map_err(|e| e.to_string())?;
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let dx: Vec<f64> = pairs.iter().map(|&(i, j)| mean_abs(&imgs[i], &imgs[j])).collect();
    let dy: Vec<f64> = pairs.iter().map(|&(i, j)| mean_abs(&doubled[i], &doubled[j])).collect();
    let (mx, sx) = moments(&dx);
    let (my, sy) = moments(&dy);
    let want = dx.iter().zip(&dy).map(|(a, b)| ((a - mx) / sx - (b - my) / sy).abs()).sum::<f64>() / 3.0;
    let bi = t.constant(Tensor::stack(&[imgs[0].clone(), imgs[0].clone(), imgs[1].clone()]).unwrap());
    let bj = t.constant(Tensor::stack(&[imgs[1].clone(), imgs[2].clone(), imgs[2].clone()]).unwrap());
    let d = distance_loss(&mut t, &twice, bi, bj, &stats).map_err(|e| e.to_string())?;
    close("distance, three-image oracle", scalar(&t, d), want, tol)?;
    n += 1;

    let y = t.constant(random_image(&mut rng, [2, 3, 4, 4]));
    let l = identity_loss(&mut t, &id, y).map_err(|e| e.to_string())?;
    close("identity, identity translator", scalar(&t, l), 0.0, tol)?;
    let l = identity_loss(&mut t, &plus_tenth, y).map_err(|e| e.to_string())?;
    close("identity, offset 0.1", scalar(&t, l), 0.1, tol)?;
    let ones = t.constant(Tensor::full([1, 3, 4, 4], 1.0));
    let l = identity_loss(&mut t, &negate, ones).map_err(|e| e.to_string())?;
    close("identity, negation on ones", scalar(&t, l), 2.0, tol)?;
    n += 3;

    let w = LossWeights::default();
    close("default geometry weight", w.geo, 20.0, 0.0)?;
    close("default cycle weight", w.cycle, 10.0, 0.0)?;
    let r = LossReport { gan_g: 0.5, geo: 0.1, ..Default::default() };
    close("geo-only total", total_objective(&r, &w).0, 2.5, tol)?;
    let full = LossReport {
        gan_g: 0.3,
        gan_d: 0.4,
        geo: 0.05,
        cycle: Some(0.2),
        distance: Some(0.7),
        identity: Some(0.11),
        total_g: 0.0,
    };
    let base = total_objective(&full, &w).0;
    let doubled = total_objective(&LossReport { cycle: Some(0.4), ..full }, &w).0;
    close("total objective linear in cycle", doubled - base, w.cycle * 0.2, 1e-12)?;
    close("discriminator total", total_objective(&full, &w).1, 0.4, 0.0)?;
    n += 5;
    Ok(format!("{n} loss examples within {tol:e} in f64"))
}

fn mean_abs(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(p, q)| (p - q).abs()).sum::<f64>() / a.len() as f64
}

fn moments(d: &[f64]) -> (f64, f64) {
    let m = d.iter().sum::<f64>() / d.len() as f64;
    (m, (d.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / d.len() as f64).sqrt())
}

// ---------------------------------------------------------------- 3

fn small_generator(width: usize) -> GeneratorSpec {
    GeneratorSpec { base_width: width, ..GeneratorSpec::resnet(1) }
}

struct GradStats {
    ok: usize,
    smooth: usize,
    crossed: usize,
    worst: f64,
}

/// Central differences (h = 1e-5) against the tape gradient for `samples`
/// random scalars of `net`, which the loss must forward under id 0. A
/// sample whose two evaluations fall on different sides of a relu or abs
/// kink has no valid difference quotient; it is counted in `crossed` and
/// left out of the comparison.
fn grad_check(
    net: &mut Network<f64>,
    loss: &dyn Fn(&mut Tape<f64>, &Network<f64>) -> Var,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> GradStats {
    const H: f64 = 1e-5;
    let mut tape = Tape::new();
    let l = loss(&mut tape, net);
    let grads = tape.backward(l);
    let analytic: Vec<Option<Tensor<f64>>> =
        (0..net.params().len()).map(|k| grads.param(ParamKey { net: 0, index: k }).cloned()).collect();
    let eval = |net: &Network<f64>| {
        let mut t = Tape::new();
        let v = loss(&mut t, net);
        (t.value(v).item(), t.kink_pattern())
    };
    let mut st = GradStats { ok: 0, smooth: 0, crossed: 0, worst: 0.0 };
    for _ in 0..samples {
        let k = rng.random_range(0..net.params().len());
        let i = rng.random_range(0..net.params()[k].value.len());
        let orig = net.params()[k].value.data()[i];
        net.params_mut()[k].value.data_mut()[i] = orig + H;
        let (up, up_kinks) = eval(net);
        net.params_mut()[k].value.data_mut()[i] = orig - H;
        let (down, down_kinks) = eval(net);
        net.params_mut()[k].value.data_mut()[i] = orig;
        if up_kinks != down_kinks {
            st.crossed += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * H);
        let a = analytic[k].as_ref().map_or(0.0, |g| g.data()[i]);
        // Gradients below 1e-8 are at the noise level of the difference quotient.
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        st.smooth += 1;
        if rel < 1e-4 {
            st.ok += 1;
        }
        st.worst = st.worst.max(rel);
    }
    st
}

fn bound(net: &Network<f64>) -> Bound<'_, f64> {
    Bound { net, id: 0, trainable: true }
}

fn criterion_3() -> Outcome {
    const SAMPLES: usize = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gen = |seed| Network::<f64>::generator(small_generator(4), seed).unwrap();
    let x = random_image(&mut rng, [1, 3, 8, 8]);
    let y = random_image(&mut rng, [1, 3, 8, 8]);
    let xi = random_image(&mut rng, [2, 3, 8, 8]);
    let xj = random_image(&mut rng, [2, 3, 8, 8]);
    let stats = DistanceStats::new(0.6, 0.15, 0.5, 0.2);
    let g_yx = gen(11);
    // The patch discriminator needs at least 24 pixels a side.
    let x24 = random_image(&mut rng, [1, 3, 24, 24]);
    let y24 = random_image(&mut rng, [1, 3, 24, 24]);
    let fake24 = random_image(&mut rng, [1, 3, 24, 24]);
    let disc = || Network::<f64>::discriminator(DiscriminatorSpec { base_width: 4, ..Default::default() }, 12).unwrap();
    let d_frozen = disc();

    type LossFn<'a> = Box<dyn Fn(&mut Tape<f64>, &Network<f64>) -> Var + 'a>;
    let cases: Vec<(&str, Network<f64>, LossFn)> = vec![
        (
            "adversarial (generator)",
            gen(1),
            Box::new(|t, n| {
                let xv = t.constant(x24.clone());
                let fake = n.forward(t, 0, xv, true).unwrap();
                let s = d_frozen.forward(t, 1, fake, false).unwrap();
                adversarial_loss_g(t, s)
            }),
        ),
        (
            "adversarial (discriminator)",
            disc(),
            Box::new(|t, n| {
                let (r, f) = (t.constant(y24.clone()), t.constant(fake24.clone()));
                let sr = n.forward(t, 0, r, true).unwrap();
                let sf = n.forward(t, 0, f, true).unwrap();
                adversarial_loss_d(t, sr, sf)
            }),
        ),
        (
            "geometry",
            gen(2),
            Box::new(|t, n| {
                let xv = t.constant(x.clone());
                geometry_consistency_loss(t, &bound(n), &bound(n), xv, GeoTransform::Rot90Cw).unwrap().terms.loss
            }),
        ),
        (
            "cycle",
            gen(3),
            Box::new(|t, n| {
                let (xv, yv) = (t.constant(x.clone()), t.constant(y.clone()));
                let back = Bound { net: &g_yx, id: 1, trainable: true };
                cycle_consistency_loss(t, &bound(n), Some(&back), xv, yv).unwrap()
            }),
        ),
        (
            "distance",
            gen(4),
            Box::new(|t, n| {
                let (a, b) = (t.constant(xi.clone()), t.constant(xj.clone()));
                distance_loss(t, &bound(n), a, b, &stats).unwrap()
            }),
        ),
        (
            "identity",
            gen(5),
            Box::new(|t, n| {
                let yv = t.constant(y.clone());
                identity_loss(t, &bound(n), yv).unwrap()
            }),
        ),
    ];
    let mut parts = Vec::new();
    let mut failed = Vec::new();
    let mut crossed = 0;
    for (name, mut net, loss) in cases {
        let st = grad_check(&mut net, &*loss, SAMPLES, &mut rng);
        let frac = st.ok as f64 / st.smooth.max(1) as f64;
        parts.push(format!("{name} {}/{}", st.ok, st.smooth));
        crossed += st.crossed;
        if frac < 0.99 || st.smooth < SAMPLES / 2 {
            failed.push(format!("{name}: {}/{} within 1e-4 (worst {:.2e}), {} across a kink", st.ok, st.smooth, st.worst, st.crossed));
        }
    }
    ensure(failed.is_empty(), || failed.join("; "))?;
    Ok(format!("{}; {crossed} samples straddling a kink skipped", parts.join(", ")))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let net = Network::<f64>::generator(small_generator(8), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for f in [GeoTransform::VFlip, GeoTransform::Rot90Cw] {
        for _ in 0..100 {
            let mut t = Tape::new();
            let x = t.constant(random_image(&mut rng, [1, 3, 8, 8]));
            let b = Bound { net: &net, id: 0, trainable: false };
            let p = geometry_consistency_loss(&mut t, &b, &b, x, f).map_err(|e| e.to_string())?;
            let gap = (scalar(&t, p.terms.inverse) - scalar(&t, p.terms.forward)).abs();
            worst = worst.max(gap);
        }
    }
    ensure(worst <= 1e-6, || format!("terms differ by up to {worst:e}"))?;
    Ok(format!("200 inputs, largest gap between the two terms {worst:.1e}"))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xs: Vec<Tensor<f64>> = (0..10).map(|_| random_image(&mut rng, [1, 3, 6, 6])).collect();
    let ys: Vec<Tensor<f64>> = (0..10).map(|_| random_image(&mut rng, [1, 3, 6, 6]).map(|v| 0.5 * v)).collect();
    let stats = precompute_distance_stats(&xs, &ys, 10_000, 0).map_err(|e| e.to_string())?;
    let all_pairs = |imgs: &[Tensor<f64>]| {
        let mut d = Vec::new();
        for i in 0..imgs.len() {
            for j in 0..i {
                d.push(mean_abs(&imgs[i], &imgs[j]));
            }
        }
        d
    };
    let (dx, dy) = (all_pairs(&xs), all_pairs(&ys));
    let ((mx, sx), (my, sy)) = (moments(&dx), moments(&dy));
    for (what, got, want) in [("mu_x", stats.mu_x, mx), ("sigma_x", stats.sigma_x, sx), ("mu_y", stats.mu_y, my), ("sigma_y", stats.sigma_y, sy)] {
        close(what, got, want, 1e-9)?;
    }
    let phi: Vec<f64> = dx.iter().map(|&d| stats.standardize_x(d).unwrap()).collect();
    let (pm, ps) = moments(&phi);
    close("mean of phi", pm, 0.0, 1e-6)?;
    close("std of phi", ps, 1.0, 1e-6)?;
    Ok(format!("{} pairs per domain, phi mean {pm:.1e}, std {ps:.9}", dx.len()))
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let mut buf = ImageBuffer::<f32>::new(50, ChaCha8Rng::seed_from_u64(6));
    let img = |v: usize| Tensor::<f32>::full([1, 1, 1, 1], v as f32);
    for k in 0..50 {
        let out = buf.query(&img(k)).map_err(|e| e.to_string())?;
        ensure(out.item() == k as f32, || "fill phase did not return the input".into())?;
    }
    ensure(buf.images().len() == 50, || format!("buffer holds {} after filling", buf.images().len()))?;
    let mut same = 0;
    for q in 0..10_000 {
        let v = 1000 + q;
        if buf.query(&img(v)).map_err(|e| e.to_string())?.item() == v as f32 {
            same += 1;
        }
        ensure(buf.images().len() <= 50, || format!("buffer grew to {}", buf.images().len()))?;
    }
    let freq = same as f64 / 10_000.0;
    close("input-return frequency", freq, 0.5, 0.02)?;
    Ok(format!("input returned {freq:.4} of 10000 queries, size stayed at 50"))
}

// ---------------------------------------------------------------- 7

/// Per-pixel counting, no confusion matrix.
fn seg_oracle(pred: &[u32], gt: &[u32], classes: u32) -> SegScores {
    let pixel_acc = pred.iter().zip(gt).filter(|(p, g)| p == g).count() as f64 / gt.len() as f64;
    let (mut acc, mut acc_n, mut iou, mut iou_n) = (0.0, 0, 0.0, 0);
    for c in 0..classes {
        let in_gt = gt.iter().filter(|&&g| g == c).count();
        let both = pred.iter().zip(gt).filter(|(p, g)| **p == c && **g == c).count();
        let either = pred.iter().zip(gt).filter(|(p, g)| **p == c || **g == c).count();
        if in_gt > 0 {
            acc += both as f64 / in_gt as f64;
            acc_n += 1;
        }
        if either > 0 {
            iou += both as f64 / either as f64;
            iou_n += 1;
        }
    }
    SegScores { pixel_acc, class_acc: acc / acc_n as f64, mean_iou: iou / iou_n as f64 }
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..1000 {
        let gt: Vec<u32> = (0..64).map(|_| rng.random_range(0..4)).collect();
        // Mix of agreement levels, including perfect predictions.
        let keep = rng.random_range(0.0..=1.0);
        let pred: Vec<u32> = gt.iter().map(|&g| if rng.random_bool(keep) { g } else { rng.random_range(0..4) }).collect();
        let got = segmentation_scores(&pred, &gt, 4, None).map_err(|e| e.to_string())?;
        let want = seg_oracle(&pred, &gt, 4);
        ensure(got == want, || format!("case {case}: {got:?} vs oracle {want:?}"))?;
    }
    let published = [((0.574, 0.234, 0.170), 0.326), ((0.58, 0.22, 0.16), 0.320)];
    for ((p, c, m), want) in published {
        let s = SegScores { pixel_acc: p, class_acc: c, mean_iou: m };
        close("aggregate score", aggregate_score(&s), want, 1e-12)?;
    }
    Ok("1000 random 8x8 four-class cases match exactly; 0.326 and 0.320 reproduced".into())
}

// ---------------------------------------------------------------- 8

fn toy_tensors(n: usize, seed: u64) -> (Vec<Tensor<f32>>, Vec<Tensor<f32>>, Vec<Tensor<f32>>) {
    let (xs, ys) = make_toy(ToyKind::Recolor, n, seed, TOY_SIZE).unwrap();
    let s = TOY_SIZE as usize;
    let conv = |img: &image::RgbImage| image_from_interleaved::<f32>(img.as_raw(), s, s, 3, 3).unwrap();
    let truth = xs
        .iter()
        .map(|img| {
            let mut img = img.clone();
            img.pixels_mut().for_each(|p| p.0 = recolor_pixel(p.0));
            conv(&img)
        })
        .collect();
    (xs.iter().map(conv).collect(), ys.iter().map(conv).collect(), truth)
}

fn residual(g: &Network<f32>, xs: &[Tensor<f32>], f: GeoTransform) -> f64 {
    let r: f64 = xs
        .iter()
        .map(|x| f.apply(&g.infer(x).unwrap()).mean_abs_diff(&g.infer(&f.apply(x)).unwrap()) as f64)
        .sum();
    r / xs.len() as f64
}

fn geo_on(g: &Network<f32>, xs: &[Tensor<f32>], f: GeoTransform) -> f64 {
    // Both terms of the shared-weight loss equal the residual.
    2.0 * residual(g, xs, f)
}

fn criterion_8() -> Outcome {
    const STEPS: usize = 1500;
    const WIDTH: usize = 16;
    let (x, y, truth) = toy_tensors(64, 7);
    let data = UnpairedData { x, y };
    let f = GeoTransform::Rot90Cw;
    let train = |constraints: Constraints| -> Result<(Network<f32>, f64, f64), CoreError> {
        let cfg = TrainConfig {
            constraints,
            transforms: vec![f],
            resolution: (32, 32),
            generator: small_generator(WIDTH),
            discriminator: DiscriminatorSpec { base_width: WIDTH, ..Default::default() },
            max_steps: Some(STEPS),
            seed: 8,
            ..TrainConfig::default()
        };
        let mut tr = Trainer::<f32>::new(cfg)?;
        let before = geo_on(tr.state.model.net(Role::Gxy).unwrap(), &data.x, f);
        let mut first = None;
        while !tr.finished() {
            tr.run_epoch(&data, None, |r, _| {
                first.get_or_insert(r.report.geo);
                Ok::<_, CoreError>(())
            })?;
        }
        let g = tr.state.model.net(Role::Gxy).unwrap().clone();
        Ok((g, before, first.unwrap_or(0.0)))
    };
    let start = Instant::now();
    let (g_geo, geo0_set, geo0_step) = train(Constraints::GEO).map_err(|e| e.to_string())?;
    let (g_base, _, _) = train(Constraints::NONE).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let geo1 = geo_on(&g_geo, &data.x, f);
    let reduction = 1.0 - geo1 / geo0_set;
    let (r_geo, r_base) = (residual(&g_geo, &data.x, f), residual(&g_base, &data.x, f));
    let ratio = r_geo / r_base;
    let err = |g: &Network<f32>| {
        data.x.iter().zip(&truth).map(|(x, t)| g.infer(x).unwrap().mean_abs_diff(t) as f64).sum::<f64>() / 64.0
    };
    let untouched = data.x.iter().zip(&truth).map(|(x, t)| x.mean_abs_diff(t) as f64).sum::<f64>() / 64.0;
    let (err_geo, err_base) = (err(&g_geo), err(&g_base));
    let summary = format!(
        "geo {geo0_set:.4} -> {geo1:.4} on the training set (first step {geo0_step:.4}), reduced {:.1}%; \
         residual {r_geo:.4} vs baseline {r_base:.4} (ratio {ratio:.3}); recolour error {err_geo:.3} \
         (baseline {err_base:.3}, input {untouched:.3}); {:.0} s",
        100.0 * reduction,
        elapsed.as_secs_f64()
    );
    ensure(reduction >= 0.8, || format!("geometry loss reduced by less than 80%: {summary}"))?;
    ensure(ratio <= 0.25, || format!("residual ratio above 0.25: {summary}"))?;
    // A collapsed generator is trivially equivariant; require actual translation.
    ensure(err_geo < untouched, || format!("generator did not learn the recolouring: {summary}"))?;
    ensure(elapsed <= Duration::from_secs(15 * 60), || format!("too slow: {summary}"))?;
    Ok(summary)
}

// ---------------------------------------------------------------- 9, 10

fn toy_run_config(dirs: &gcgan::toy::ToyDirs, out: &Path) -> RunConfig {
    let mut cfg = RunConfig {
        data_x: Some(dirs.x.clone()),
        data_y: Some(dirs.y.clone()),
        out_dir: out.to_path_buf(),
        ..RunConfig::default()
    };
    for (k, v) in [
        ("resolution", "32"),
        ("blocks", "1"),
        ("gen_width", "4"),
        ("disc_width", "4"),
        ("epochs_const", "1"),
        ("epochs_decay", "1"),
        ("checkpoint_every", "1"),
        ("seed", "9"),
    ] {
        cfg.set(k, v).unwrap();
    }
    cfg
}

fn criterion_9() -> Outcome {
    let cfg = TrainConfig::default();
    let lr = |e| lr_at(&cfg, e).map_err(|e| e.to_string());
    for e in 0..100 {
        ensure(lr(e)? == 2e-4, || format!("epoch {e}: {}", lr(e).unwrap()))?;
    }
    for (e, want) in [(100, 1.98e-4), (149, 1e-4), (150, 0.98e-4), (199, 0.0)] {
        close(&format!("lr at epoch {e}"), lr(e)?, want, 1e-18)?;
    }
    ensure(lr(149)? == 1e-4, || "epoch 149 is not exactly 1e-4".into())?;
    let mut prev = f64::INFINITY;
    for e in 0..200 {
        ensure(lr(e)? <= prev, || format!("schedule increases at epoch {e}"))?;
        prev = lr(e)?;
    }
    ensure(lr(199)? <= 2e-4 / 100.0, || "final epoch above lr / epochs_decay".into())?;
    ensure(lr_at(&cfg, 200).is_err(), || "epoch 200 accepted".into())?;

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dirs = write_toy(ToyKind::Recolor, &tmp.path().join("toy"), 4, 9).map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    for k in 0..2 {
        let cfg = toy_run_config(&dirs, &tmp.path().join(format!("run{k}")));
        let m = run::train(&cfg, None, |_, _| {}).map_err(|e| e.to_string())?;
        bytes.push(std::fs::read(&m.runs[0].final_checkpoint).map_err(|e| e.to_string())?);
    }
    ensure(bytes[0] == bytes[1], || "seeded runs wrote different checkpoints".into())?;
    Ok(format!("lr schedule exact; two seeded toy runs wrote identical {}-byte checkpoints", bytes[0].len()))
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dirs = write_toy(ToyKind::Recolor, &tmp.path().join("toy"), 8, 10).map_err(|e| e.to_string())?;
    // (name, settings, cycle logged, distance logged)
    let ablations: [(&str, &[(&str, &str)], bool, bool); 5] = [
        ("vf", &[("transforms", "vflip")], false, false),
        ("mix", &[("transforms", "mix")], false, false),
        ("rot-separate", &[("sharing", "separate")], false, false),
        ("rot+cycle", &[("constraints", "geo,cycle")], true, false),
        ("rot+dist", &[("constraints", "geo,distance")], false, true),
    ];
    let mut done = Vec::new();
    for (name, settings, cycle, distance) in ablations {
        let mut cfg = toy_run_config(&dirs, &tmp.path().join(name));
        cfg.set("epochs_decay", "0").unwrap();
        for (k, v) in settings {
            cfg.set(k, v).unwrap();
        }
        let m = run::train(&cfg, None, |_, _| {}).map_err(|e| format!("{name}: {e}"))?;
        let rows = log::read(&m.runs[0].log).map_err(|e| e.to_string())?;
        ensure(rows.len() == 8, || format!("{name}: {} log rows", rows.len()))?;
        for r in &rows {
            ensure(r.geo > 0.0 && r.geo.is_finite(), || format!("{name}: geo not logged"))?;
            ensure(r.cycle.is_some() == cycle, || format!("{name}: cycle column wrong"))?;
            ensure(r.distance.is_some() == distance, || format!("{name}: distance column wrong"))?;
            ensure(r.identity.is_none(), || format!("{name}: identity logged"))?;
        }
        let trainer = checkpoint::load(&m.runs[0].final_checkpoint).map_err(|e| e.to_string())?;
        let model = &trainer.state.model;
        let want_sharing = if name == "rot-separate" { SharingMode::Separate } else { SharingMode::Shared };
        ensure(model.sharing() == want_sharing, || format!("{name}: sharing {}", model.sharing()))?;
        ensure(model.has_cycle() == cycle, || format!("{name}: G_YX presence wrong"))?;
        if name == "rot-separate" {
            let (a, b) = (model.net(Role::Gxy).unwrap(), model.net(Role::GxyT).unwrap());
            ensure(a.params() != b.params(), || "separate translators did not diverge".into())?;
        }
        if name == "mix" {
            let pool = trainer.cfg.transforms.clone();
            let plan = EpochPlan::new(
                &PlanSpec {
                    n_x: 8,
                    n_y: 8,
                    batch_size: 1,
                    transforms: &pool,
                    stored_hw: (32, 32),
                    crop_hw: (32, 32),
                    augment: false,
                },
                trainer.cfg.seed,
                0,
            )
            .map_err(|e| e.to_string())?;
            for f in [GeoTransform::Rot90Cw, GeoTransform::VFlip] {
                ensure(plan.steps.iter().any(|s| s.transform == f), || format!("mix never drew {f}"))?;
            }
        }
        done.push(name);
    }
    Ok(format!("{} each trained one epoch with the expected loss columns", done.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("transform group laws", criterion_1, Duration::from_secs(1)),
        ("loss fixed points", criterion_2, Duration::from_secs(5)),
        ("gradient correctness", criterion_3, Duration::from_secs(120)),
        ("geometry loss symmetry", criterion_4, Duration::MAX),
        ("distance statistics oracle", criterion_5, Duration::MAX),
        ("image buffer statistics", criterion_6, Duration::MAX),
        ("metric oracles", criterion_7, Duration::MAX),
        ("toy-scale training", criterion_8, Duration::from_secs(15 * 60)),
        ("schedule and reproducibility", criterion_9, Duration::MAX),
        ("ablation wiring", criterion_10, Duration::MAX),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|msg| {
            ensure(elapsed <= *budget, || format!("took {elapsed:.1?}, budget {budget:?}")).map(|_| msg)
        });
        match outcome {
            Ok(msg) => println!("criterion {n:>2} PASS  {name}: {msg} [{elapsed:.2?}]"),
            Err(msg) => {
                failures += 1;
                println!("criterion {n:>2} FAIL  {name}: {msg} [{elapsed:.2?}]");
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
