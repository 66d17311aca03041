mod common;

use common::*;
use wlrbg::frame_io::Dataset;
use wlrbg::numerics::svd;
use wlrbg::pipeline::*;
use wlrbg::synth::{generate, SynthSpec};
use wlrbg::{DenseMatrix, PipelineConfig};

fn small_spec() -> SynthSpec {
    SynthSpec {
        height: 32,
        width: 40,
        n_frames: 60,
        sprite_size: 8,
        empty_ranges: vec![(2, 4), (40, 45)],
        static_range: Some((55, 60)),
        ..SynthSpec::default()
    }
}

fn fg_counts(d: &Dataset) -> Vec<usize> {
    let gt = d.ground_truth.as_ref().unwrap();
    gt.column_iter().map(|c| c.iter().filter(|&&v| v > 0.0).count()).collect()
}

fn permuted(d: &Dataset, perm: &[usize]) -> Dataset {
    Dataset {
        frames: d.frames.select_columns(perm),
        ground_truth: d.ground_truth.as_ref().map(|g| g.select_columns(perm)),
        names: perm.iter().map(|&j| d.names[j].clone()).collect(),
        ..d.clone()
    }
}

#[test]
fn pipeline_is_permutation_equivariant() {
    // noise keeps every frame distinct; identical frames may trade places
    let d = generate(&SynthSpec { noise_sigma: 2.0, ..small_spec() }).unwrap();
    let n = d.n_frames();
    let mut g = rng(3);
    let mut perm: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(&mut perm[..], &mut g);
    let cfg = PipelineConfig::default();
    let (dec, sel, _) = run_pipeline(&d, &cfg).unwrap();
    let (pdec, psel, _) = run_pipeline(&permuted(&d, &perm), &cfg).unwrap();

    let mapped: Vec<usize> = {
        let mut s: Vec<usize> = psel.s.iter().map(|&j| perm[j]).collect();
        s.sort_unstable();
        s
    };
    assert_eq!(mapped, sel.s);
    assert_eq!((psel.k, psel.r), (sel.k, sel.r));
    let expect = dec.background.select_columns(&perm);
    assert!(rel_err(&pdec.background, &expect) < 1e-9);
}

#[test]
fn output_keeps_input_order_and_rank() {
    let d = generate(&small_spec()).unwrap();
    let (dec, sel, state) = run_pipeline(&d, &PipelineConfig::default()).unwrap();
    for (j, &p) in sel.permutation.iter().enumerate() {
        assert_eq!(sel.inverse[p], j);
    }
    assert_eq!(&dec.background + &dec.foreground, d.frames);
    let s = svd(&dec.background).unwrap().s;
    assert!(s.iter().skip(sel.r).all(|&x| x <= 1e-8 * s[0]));
    assert_eq!(state.rank(), sel.r);
    // first-block columns of the output are the selected frames' approximations
    for (j, &p) in sel.first_block.iter().enumerate() {
        assert_eq!(dec.background.column(p), state.x1.column(j));
    }
}

#[test]
fn selection_is_better_than_average() {
    for seed in 0..3 {
        let spec = SynthSpec { seed, ..SynthSpec::default() };
        let d = generate(&spec).unwrap();
        let (dec, sel, _) = run_pipeline(&d, &PipelineConfig { seed, ..PipelineConfig::default() }).unwrap();
        let counts = fg_counts(&d);
        let mean_all = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        let mean_s = sel.s.iter().map(|&j| counts[j]).sum::<usize>() as f64 / sel.s.len() as f64;
        assert!(mean_s <= mean_all, "seed {seed}: {mean_s} > {mean_all}");

        let tf = dec.thresholded_foreground.as_ref().unwrap();
        for (j, &c) in counts.iter().enumerate() {
            if c == 0 {
                assert!(tf.column(j).iter().all(|&x| x == 0.0), "seed {seed} frame {}", j + 1);
            }
        }
    }
}

#[test]
fn twelve_empty_frames_are_found() {
    let spec = SynthSpec {
        empty_ranges: vec![(20, 25), (70, 75)],
        static_range: None,
        ..SynthSpec::default()
    };
    let d = generate(&spec).unwrap();
    let (_, sel, _) = run_pipeline(&d, &PipelineConfig::default()).unwrap();
    let empty: Vec<usize> = (0..spec.n_frames).filter(|&j| spec.is_empty_frame(j + 1)).collect();
    assert_eq!(empty.len(), 12);
    let hits = sel.s.iter().filter(|j| empty.contains(j)).count();
    let moving = sel.s.len() - hits;
    assert!(hits >= 10, "only {hits} of 12 empty frames selected");
    assert!(moving as f64 <= 0.2 * sel.s.len() as f64, "{moving} moving frames in |S| = {}", sel.s.len());
}

#[test]
fn initial_residual_concentrates_on_sprite() {
    let spec = SynthSpec::default();
    let d = generate(&spec).unwrap();
    let gt = d.ground_truth.as_ref().unwrap();
    let (_, f_in) = initial_decompose(&d.frames, PipelineConfig::default().svt_tau).unwrap();
    let on_sprite: f64 = f_in.iter().zip(gt.iter()).filter(|(_, &g)| g > 0.0).map(|(f, _)| f * f).sum();
    let share = on_sprite / f_in.norm_squared();
    assert!(share >= 0.8, "sprite holds {share:.3} of the residual energy");
}

#[test]
fn eps1_clears_background_pixels() {
    let d = generate(&SynthSpec::default()).unwrap();
    let gt = d.ground_truth.as_ref().unwrap();
    let (b_in, f_in) = initial_decompose(&d.frames, 0.05).unwrap();
    let eps1 = select_eps1(&f_in, Eps1Strategy::Otsu);
    let (lf, _) = binarize(&f_in, &b_in, eps1);
    let (mut zero, mut total) = (0usize, 0usize);
    for (on, &g) in lf.iter().zip(gt.iter()) {
        if g == 0.0 {
            total += 1;
            zero += usize::from(!on);
        }
    }
    let share = zero as f64 / total as f64;
    assert!(share >= 0.95, "{share:.4} of background pixels binarize to 0");
}

#[test]
fn binarize_and_scores_match_loops() {
    let mut g = rng(12);
    let f = randn(&mut g, 9, 7);
    let mut b = randn(&mut g, 9, 7);
    b[(2, 3)] = 0.0;
    b.column_mut(5).fill(0.0);
    let eps1 = 0.7;
    let (lf, lb) = binarize(&f, &b, eps1);
    let scores = percentage_scores(&lf, &lb);
    for j in 0..7 {
        let (mut nf, mut nb) = (0, 0);
        for i in 0..9 {
            assert_eq!(lf[(i, j)], f[(i, j)].abs() > eps1);
            assert_eq!(lb[(i, j)], b[(i, j)] != 0.0);
            nf += usize::from(lf[(i, j)]);
            nb += usize::from(lb[(i, j)]);
        }
        let want = if nb == 0 { f64::INFINITY } else { 100.0 * nf as f64 / nb as f64 };
        assert_eq!(scores[j], want);
    }
}

#[test]
fn static_scene_is_pure_background() {
    let frame: Vec<f64> = (0..120).map(|p| 50.0 + (p % 17) as f64).collect();
    let frames = DenseMatrix::from_fn(120, 12, |i, _| frame[i]);
    let d = Dataset {
        height: 10,
        width: 12,
        frames: frames.clone(),
        ground_truth: None,
        names: (0..12).map(|j| j.to_string()).collect(),
    };
    let (dec, _, _) = run_pipeline(&d, &PipelineConfig::default()).unwrap();
    assert!(rel_err(&dec.background, &frames) < 1e-6);
    assert!(dec.thresholded_foreground.unwrap().iter().all(|&x| x == 0.0));
}
