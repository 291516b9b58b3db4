//! Checkpoint directories.
//!
//! A checkpoint is a directory holding `manifest.json`, which fixes the
//! architecture, and one `sub_XXX.bin` per sub-estimator holding nothing
//! but little-endian 64-bit parameters in a fixed order: inner layers then
//! outer layers, each layer's weights row-major then its biases.  Keeping
//! every shape in the manifest makes the blobs self-checking: a byte count
//! that disagrees with the declared shapes is rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::network::{
    Activation, DeepSetsEstimator, DenseLayer, ExpertStats, Mlp, NetworkError, PiecewiseEstimator,
};

const VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    version: u32,
    n: usize,
    p: usize,
    q: usize,
    psi_layers: Vec<LayerSpec>,
    phi_layers: Vec<LayerSpec>,
    expert_stats: ExpertStats,
    changepoints: Vec<usize>,
    training_sizes: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerSpec {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
}

fn layer_specs(mlp: &Mlp) -> Vec<LayerSpec> {
    mlp.layers()
        .iter()
        .map(|l| LayerSpec {
            in_dim: l.in_dim(),
            out_dim: l.out_dim(),
            activation: l.activation(),
        })
        .collect()
}

fn blob_name(k: usize) -> String {
    format!("sub_{k:03}.bin")
}

pub(crate) fn save(pw: &PiecewiseEstimator, dir: &Path) -> Result<(), NetworkError> {
    let first = pw.sub(0);
    let psi_layers = layer_specs(first.psi());
    let phi_layers = layer_specs(first.phi());
    for sub in pw.subs() {
        if layer_specs(sub.psi()) != psi_layers
            || layer_specs(sub.phi()) != phi_layers
            || sub.expert() != first.expert()
        {
            return Err(NetworkError::Format(
                "sub-estimators differ in architecture; the checkpoint stores one shared layer specification"
                    .into(),
            ));
        }
    }
    let manifest = Manifest {
        version: VERSION,
        n: first.n(),
        p: first.p(),
        q: first.q(),
        psi_layers,
        phi_layers,
        expert_stats: first.expert().clone(),
        changepoints: pw.changepoints().to_vec(),
        training_sizes: pw.training_sizes().to_vec(),
    };
    fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| NetworkError::Format(format!("manifest: {e}")))?;
    fs::write(dir.join(MANIFEST), text)?;
    for (k, sub) in pw.subs().iter().enumerate() {
        let flat = sub.params_flat();
        let mut bytes = Vec::with_capacity(flat.len() * 8);
        for v in flat {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(dir.join(blob_name(k)), bytes)?;
    }
    Ok(())
}

pub(crate) fn load(dir: &Path) -> Result<PiecewiseEstimator, NetworkError> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| NetworkError::Format(format!("manifest: {e}")))?;
    if manifest.version != VERSION {
        return Err(NetworkError::Format(format!(
            "unsupported checkpoint version {}",
            manifest.version
        )));
    }
    manifest.expert_stats.validate()?;
    check_consistency(&manifest)?;

    let params_per_sub: usize = manifest
        .psi_layers
        .iter()
        .chain(&manifest.phi_layers)
        .map(|l| l.in_dim * l.out_dim + l.out_dim)
        .sum();
    let mut subs = Vec::with_capacity(manifest.training_sizes.len());
    for k in 0..manifest.training_sizes.len() {
        let bytes = fs::read(dir.join(blob_name(k)))?;
        if bytes.len() < params_per_sub * 8 {
            return Err(NetworkError::Format(format!(
                "{} truncated: {} bytes, manifest shapes need {}",
                blob_name(k),
                bytes.len(),
                params_per_sub * 8
            )));
        }
        if bytes.len() > params_per_sub * 8 {
            return Err(NetworkError::Format(format!(
                "{} has {} trailing bytes",
                blob_name(k),
                bytes.len() - params_per_sub * 8
            )));
        }
        let flat: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        subs.push(build_sub(&manifest, &flat, k)?);
    }
    PiecewiseEstimator::new(subs, manifest.changepoints, manifest.training_sizes)
}

// The manifest repeats n, p and q alongside the layer shapes; reject files
// where the two descriptions disagree rather than trusting either.
fn check_consistency(m: &Manifest) -> Result<(), NetworkError> {
    for (name, layers) in [("psi", &m.psi_layers), ("phi", &m.phi_layers)] {
        if layers.is_empty() {
            return Err(NetworkError::Format(format!("{name} has no layers")));
        }
        for w in layers.windows(2) {
            if w[0].out_dim != w[1].in_dim {
                return Err(NetworkError::Format(format!(
                    "{name} layer dimensions do not chain"
                )));
            }
        }
    }
    let psi_in = m.psi_layers[0].in_dim;
    let psi_out = m.psi_layers[m.psi_layers.len() - 1].out_dim;
    let phi_in = m.phi_layers[0].in_dim;
    let phi_out = m.phi_layers[m.phi_layers.len() - 1].out_dim;
    if m.n != psi_in {
        return Err(NetworkError::Format(format!(
            "manifest n = {} disagrees with first layer input {psi_in}",
            m.n
        )));
    }
    if m.q != psi_out {
        return Err(NetworkError::Format(format!(
            "manifest q = {} disagrees with inner network output {psi_out}",
            m.q
        )));
    }
    if m.p != phi_out {
        return Err(NetworkError::Format(format!(
            "manifest p = {} disagrees with outer network output {phi_out}",
            m.p
        )));
    }
    let want = m.q + m.expert_stats.output_len(m.n);
    if phi_in != want {
        return Err(NetworkError::Format(format!(
            "outer network input {phi_in} disagrees with summary plus statistics {want}"
        )));
    }
    Ok(())
}

fn build_sub(
    manifest: &Manifest,
    flat: &[f64],
    k: usize,
) -> Result<DeepSetsEstimator, NetworkError> {
    let mut at = 0;
    let mut take_mlp = |specs: &[LayerSpec]| -> Result<Mlp, NetworkError> {
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let nw = spec.in_dim * spec.out_dim;
            let weights = flat[at..at + nw].to_vec();
            at += nw;
            let bias = flat[at..at + spec.out_dim].to_vec();
            at += spec.out_dim;
            layers.push(
                DenseLayer::new(spec.in_dim, spec.out_dim, weights, bias, spec.activation)
                    .map_err(|e| {
                        NetworkError::Format(format!("{}: {e}", blob_name(k)))
                    })?,
            );
        }
        Mlp::new(layers)
    };
    let psi = take_mlp(&manifest.psi_layers)?;
    let phi = take_mlp(&manifest.phi_layers)?;
    DeepSetsEstimator::new(psi, phi, manifest.expert_stats.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{model_id, ReplicateSet};
    use crate::numerics::RngStream;
    use std::fs::OpenOptions;

    fn two_sub_estimator() -> PiecewiseEstimator {
        let expert = ExpertStats::quantiles(vec![0.25, 0.75]).unwrap();
        let mut subs = Vec::new();
        for k in 0..2u64 {
            let mut rng = RngStream::new(600 + k, 0);
            subs.push(
                DeepSetsEstimator::with_architecture(
                    2,
                    2,
                    3,
                    &[5],
                    &[4],
                    expert.clone(),
                    &mut rng,
                )
                .unwrap(),
            );
        }
        PiecewiseEstimator::new(subs, vec![4], vec![1, 8]).unwrap()
    }

    fn sample_set() -> ReplicateSet {
        let mut rng = RngStream::new(601, 0);
        let data = (0..2 * 6).map(|_| rng.uniform(-2.0, 2.0)).collect();
        ReplicateSet::new(2, 6, data, model_id::CUSTOM).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let pw = two_sub_estimator();
        pw.save(dir.path()).unwrap();
        let back = PiecewiseEstimator::load(dir.path()).unwrap();
        assert_eq!(back.changepoints(), pw.changepoints());
        assert_eq!(back.training_sizes(), pw.training_sizes());
        for (a, b) in pw.subs().iter().zip(back.subs()) {
            let fa = a.params_flat();
            let fb = b.params_flat();
            assert_eq!(fa.len(), fb.len());
            assert!(fa
                .iter()
                .zip(&fb)
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        let rs = sample_set();
        let want = pw.estimate(&rs).unwrap();
        let got = back.estimate(&rs).unwrap();
        assert!(want
            .iter()
            .zip(&got)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        two_sub_estimator().save(dir.path()).unwrap();
        let path = dir.path().join("sub_001.bin");
        let len = fs::metadata(&path).unwrap().len();
        let file = OpenOptions::new().write(true).open(&path).unwrap();
        file.set_len(len - 5).unwrap();
        drop(file);
        let err = PiecewiseEstimator::load(dir.path()).unwrap_err();
        assert!(matches!(&err, NetworkError::Format(msg) if msg.contains("truncated")), "{err}");
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        two_sub_estimator().save(dir.path()).unwrap();
        let path = dir.path().join("sub_000.bin");
        let mut bytes = fs::read(&path).unwrap();
        bytes.extend_from_slice(&[0u8; 8]);
        fs::write(&path, bytes).unwrap();
        let err = PiecewiseEstimator::load(dir.path()).unwrap_err();
        assert!(matches!(&err, NetworkError::Format(msg) if msg.contains("trailing")), "{err}");
    }

    #[test]
    fn manifest_dimension_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        two_sub_estimator().save(dir.path()).unwrap();
        let path = dir.path().join("manifest.json");
        let mut doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        doc["n"] = serde_json::json!(3);
        fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
        let err = PiecewiseEstimator::load(dir.path()).unwrap_err();
        assert!(matches!(&err, NetworkError::Format(msg) if msg.contains("disagrees")), "{err}");
    }

    #[test]
    fn unsupported_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        two_sub_estimator().save(dir.path()).unwrap();
        let path = dir.path().join("manifest.json");
        let mut doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        doc["version"] = serde_json::json!(99);
        fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
        let err = PiecewiseEstimator::load(dir.path()).unwrap_err();
        assert!(matches!(&err, NetworkError::Format(msg) if msg.contains("version")), "{err}");
    }

    #[test]
    fn unknown_manifest_field_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        two_sub_estimator().save(dir.path()).unwrap();
        let path = dir.path().join("manifest.json");
        let mut doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        doc["surprise"] = serde_json::json!(1);
        fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
        assert!(matches!(
            PiecewiseEstimator::load(dir.path()),
            Err(NetworkError::Format(_))
        ));
    }

    #[test]
    fn missing_blob_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        two_sub_estimator().save(dir.path()).unwrap();
        fs::remove_file(dir.path().join("sub_001.bin")).unwrap();
        assert!(matches!(
            PiecewiseEstimator::load(dir.path()),
            Err(NetworkError::Io(_))
        ));
    }

    #[test]
    fn heterogeneous_sub_estimators_cannot_be_saved() {
        let mut rng = RngStream::new(602, 0);
        let a = DeepSetsEstimator::with_architecture(2, 1, 3, &[5], &[4], ExpertStats::None, &mut rng)
            .unwrap();
        let b = DeepSetsEstimator::with_architecture(2, 1, 3, &[6], &[4], ExpertStats::None, &mut rng)
            .unwrap();
        let pw = PiecewiseEstimator::new(vec![a, b], vec![4], vec![1, 8]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            pw.save(dir.path()),
            Err(NetworkError::Format(_))
        ));
    }

    #[test]
    fn single_sub_checkpoint_round_trips() {
        let mut rng = RngStream::new(603, 0);
        let est = DeepSetsEstimator::with_architecture(
            1,
            1,
            2,
            &[3],
            &[3],
            ExpertStats::None,
            &mut rng,
        )
        .unwrap();
        let pw = PiecewiseEstimator::single(est, 10).unwrap();
        let dir = tempfile::tempdir().unwrap();
        pw.save(dir.path()).unwrap();
        let back = PiecewiseEstimator::load(dir.path()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back.sub(0).params_flat(), pw.sub(0).params_flat());
    }
}
