use mixedit::dsp::{stft, Clip, StftConfig};
use mixedit::editor::{
    ideal_mask, load_checkpoint, mask_edit, mask_to_mel, pit_loss_grad, save_checkpoint, snr_loss_grad, to_pgm,
    toy_dataset, Conditioning, FilmConfig, FilmMaskNet, MaskKind, ToyExample, DEFAULT_M_MAX,
};
use mixedit::instruction::Action;
use mixedit::metrics::snr;
use mixedit::mixer;
use mixedit::taskspace::{enumerate_edits, Composition, Task};
use std::f64::consts::PI;

/// SNR in dB computed from scratch, without the library's metric code.
fn plain_snr(est: &[f64], reference: &[f64]) -> f64 {
    let s: f64 = reference.iter().map(|v| v * v).sum();
    let n: f64 = est.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum();
    10.0 * (s / n).log10()
}

#[test]
fn conditioning_gradient_matches_finite_differences() {
    let net = FilmMaskNet::new(FilmConfig::toy(), 21).unwrap();
    let ex = ToyExample::tonal(1600, 8, 3);
    let lg = snr_loss_grad(&net, &ex.x, &ex.z, &ex.y).unwrap();
    let base = lg.output.activation_pattern();
    let h = 1e-4;
    let mut checked = 0;
    for i in 0..8 {
        let mut zp = ex.z.clone();
        zp[i] += h;
        let mut zm = ex.z.clone();
        zm[i] -= h;
        let op = net.forward(&ex.x, Conditioning::Embedding(&zp)).unwrap();
        let om = net.forward(&ex.x, Conditioning::Embedding(&zm)).unwrap();
        if op.activation_pattern() != base || om.activation_pattern() != base {
            continue;
        }
        let num = (-plain_snr(&op.output, &ex.y) + plain_snr(&om.output, &ex.y)) / (2.0 * h);
        let a = lg.grads.z[i];
        assert!((a - num).abs() <= 1e-3 * a.abs().max(num.abs()).max(1e-6), "z[{i}]: {a} vs {num}");
        checked += 1;
    }
    assert!(checked >= 4, "only {checked} conditioning entries were away from kinks");
}

#[test]
fn pit_gradient_matches_finite_differences() {
    let mut net = FilmMaskNet::new(FilmConfig { n_masks: 2, ..FilmConfig::toy() }, 22).unwrap();
    // one with a volume change so no reference is silent
    let ex = (0..)
        .map(|s| ToyExample::tonal(800, 8, s))
        .find(|e| e.sources.as_ref().unwrap().iter().all(|s| s.iter().any(|v| *v != 0.0)))
        .unwrap();
    let (_, g) = pit_loss_grad(&net, &ex).unwrap();
    let h = 1e-4;
    let head = net.head_bias_range();
    for i in head.chain(net.head_weight_range().step_by(7)) {
        let p0 = net.params()[i];
        net.params_mut()[i] = p0 + h;
        let (fp, _) = pit_loss_grad(&net, &ex).unwrap();
        net.params_mut()[i] = p0 - h;
        let (fm, _) = pit_loss_grad(&net, &ex).unwrap();
        net.params_mut()[i] = p0;
        let num = (fp - fm) / (2.0 * h);
        let a = g.params[i];
        // a swap of the best permutation or a kink shows up as a large jump; both are rare here
        assert!((a - num).abs() <= 1e-3 * a.abs().max(num.abs()).max(1e-6), "param {i}: {a} vs {num}");
    }
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.bin");
    let net = FilmMaskNet::new(FilmConfig { channels: 12, blocks: 3, ..FilmConfig::toy() }, 5).unwrap();
    save_checkpoint(&net, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.config(), net.config());
    let data = toy_dataset(1, 800, 8, 1);
    let a = net.forward(&data[0].x, Conditioning::Embedding(&data[0].z)).unwrap();
    let b = back.forward(&data[0].x, Conditioning::Embedding(&data[0].z)).unwrap();
    // f32 storage: outputs agree to single precision
    assert!(plain_snr(&b.output, &a.output) > 100.0);
}

#[test]
fn psm_volume_masks_combine_linearly() {
    // frequency-disjoint sources: the mask for a combined edit equals the
    // per-region combination of single-action masks
    let n = 16_000;
    let tone = |f: f64, a: f64| Clip::new((0..n).map(|i| a * (2.0 * PI * f * i as f64 / 16_000.0).sin()).collect(), 16_000).unwrap();
    let srcs = [tone(500.0, 0.4), tone(3000.0, 0.3)];
    let x = mixer::mix(&srcs).unwrap();
    let mask_for = |acts: [Action; 2]| {
        let y = mixer::target_mixture(&srcs, &acts).unwrap();
        ideal_mask(&x, &y, MaskKind::Psm, DEFAULT_M_MAX).unwrap()
    };
    let both = mask_for([Action::VolUp, Action::VolDown]);
    let up = mask_for([Action::VolUp, Action::Keep]);
    let down = mask_for([Action::Keep, Action::VolDown]);
    let spec = stft(&x, StftConfig::default()).unwrap();
    let mut compared = 0;
    for (f, frame) in spec.frames.iter().enumerate().skip(4).take(spec.n_frames() - 8) {
        for (k, c) in frame.iter().enumerate() {
            let hz = spec.bin_hz(k);
            if c.norm() < 1e-2 {
                continue;
            }
            let expected = if hz < 1500.0 { up.values[f][k] } else { down.values[f][k] };
            assert!((both.values[f][k] - expected).abs() < 1e-6, "bin {k} frame {f}");
            compared += 1;
        }
    }
    assert!(compared > 100);
    let est = mask_edit(&x, &both).unwrap();
    let y = mixer::target_mixture(&srcs, &[Action::VolUp, Action::VolDown]).unwrap();
    assert!(snr(&est, &y).unwrap().value > 40.0);
}

#[test]
fn mel_export_of_an_ideal_mask() {
    let n = 8000;
    let clip = |f: f64| Clip::new((0..n).map(|i| 0.3 * (2.0 * PI * f * i as f64 / 16_000.0).sin()).collect(), 16_000).unwrap();
    let srcs = [clip(300.0), clip(4000.0)];
    let x = mixer::mix(&srcs).unwrap();
    let y = mixer::target_mixture(&srcs, &[Action::Keep, Action::Remove]).unwrap();
    let m = ideal_mask(&x, &y, MaskKind::Psm, DEFAULT_M_MAX).unwrap();
    let mel = mask_to_mel(&m, 80, 16_000);
    assert_eq!(mel.len(), 80);
    assert_eq!(mel[0].len(), m.n_frames());
    let pgm = to_pgm(&mel, DEFAULT_M_MAX);
    assert!(pgm.starts_with(format!("P5\n{} 80\n255\n", m.n_frames()).as_bytes()));
    assert!(mel.iter().flatten().all(|v| (0.0..=DEFAULT_M_MAX).contains(v)));
}

#[test]
fn embeddings_of_all_edits_are_distinct() {
    use mixedit::editor::embed_instruction;
    use mixedit::instruction::{Instruction, Signature, StyleVector};
    use mixedit::prompt::simplify;
    let comp = Composition::new(2, 2).unwrap();
    let styles = StyleVector::all();
    let sigs = [Signature::speech(styles[0]),
        Signature::speech(styles[styles.len() - 1]),
        Signature::audio("dog barking").unwrap(),
        Signature::audio("rain").unwrap()];
    let mut zs = Vec::new();
    for task in Task::ALL {
        let Ok(edits) = enumerate_edits(task, comp) else { continue };
        for acts in edits {
            let instr = Instruction::new(acts.iter().copied().zip(sigs.iter().cloned()).collect()).unwrap();
            zs.push(embed_instruction(&simplify(&instr, 0).unwrap(), 32));
        }
    }
    assert_eq!(zs.len(), 254);
    for i in 0..zs.len() {
        for j in i + 1..zs.len() {
            let d: f64 = zs[i].iter().zip(&zs[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!(d > 1e-3, "edits {i} and {j} collide");
        }
    }
}
