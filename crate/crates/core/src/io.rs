//! Checkpoints, CSV tables, key-value configs and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::MixtureKind;
use crate::error::{Error, FormatError, Result};
use crate::game::{GanGame, GenLoss, LatentPrior};
use crate::net::{validate_spec, Activation, LayerSpec, NetParams};
use crate::train::{LossRow, Snapshot, TrainConfig};

pub const CHECKPOINT_MAGIC: &str = "DUALGAP-CKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
/// Separates the text header from the little-endian `f64` payload.
pub const PAYLOAD_SENTINEL: &str = "--- payload ---";

fn spec_line(spec: &[LayerSpec]) -> String {
    spec.iter()
        .map(|l| format!("{}:{}:{}", l.in_dim, l.out_dim, l.activation.token()))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_spec_line(line: &str) -> Result<Vec<LayerSpec>> {
    let spec = line
        .split_whitespace()
        .map(|tok| {
            let mut parts = tok.splitn(3, ':');
            let bad = || FormatError::Header(format!("bad layer token {tok:?}"));
            let in_dim = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let out_dim = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let act = parts.next().and_then(Activation::parse_token).ok_or_else(bad)?;
            Ok(LayerSpec::new(in_dim, out_dim, act))
        })
        .collect::<std::result::Result<Vec<_>, FormatError>>()?;
    validate_spec(&spec).map_err(|e| FormatError::ShapeInconsistency(e.to_string()))?;
    Ok(spec)
}

/// Serializes a snapshot: text header, sentinel line, then generator and
/// discriminator parameters as little-endian `f64`.
pub fn encode_checkpoint(snapshot: &Snapshot) -> Vec<u8> {
    let (g, d) = (&snapshot.gen, &snapshot.disc);
    let header = format!(
        "{CHECKPOINT_MAGIC}\nversion = {CHECKPOINT_VERSION}\nstep = {}\ngen = {}\ndisc = {}\nparams = {} {}\n{PAYLOAD_SENTINEL}\n",
        snapshot.step,
        spec_line(g.spec()),
        spec_line(d.spec()),
        g.len(),
        d.len()
    );
    let mut out = header.into_bytes();
    out.reserve(8 * (g.len() + d.len()));
    for v in g.as_slice().iter().chain(d.as_slice()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Snapshot> {
    if !bytes.starts_with(CHECKPOINT_MAGIC.as_bytes()) || bytes.get(CHECKPOINT_MAGIC.len()) != Some(&b'\n') {
        return Err(FormatError::BadMagic.into());
    }
    let marker = format!("\n{PAYLOAD_SENTINEL}\n");
    let split = bytes
        .windows(marker.len())
        .position(|w| w == marker.as_bytes())
        .ok_or_else(|| FormatError::Header("missing payload sentinel".into()))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|_| FormatError::Header("header is not UTF-8".into()))?;
    let payload = &bytes[split + marker.len()..];

    let mut fields = BTreeMap::new();
    for line in header.lines().skip(1) {
        let (k, v) = line
            .split_once(" = ")
            .ok_or_else(|| FormatError::Header(format!("bad header line {line:?}")))?;
        fields.insert(k, v);
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| FormatError::Header(format!("missing {k}")))
    };
    let version: u32 = get("version")?
        .parse()
        .map_err(|_| FormatError::Header("bad version".into()))?;
    if version != CHECKPOINT_VERSION {
        return Err(FormatError::UnsupportedVersion {
            found: version,
            supported: CHECKPOINT_VERSION,
        }
        .into());
    }
    let step: usize = get("step")?
        .parse()
        .map_err(|_| FormatError::Header("bad step".into()))?;
    let gen_spec = parse_spec_line(get("gen")?)?;
    let disc_spec = parse_spec_line(get("disc")?)?;
    let counts: Vec<usize> = get("params")?
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| FormatError::Header("bad params line".into())))
        .collect::<std::result::Result<_, _>>()?;
    let expected_counts = [
        gen_spec.iter().map(LayerSpec::param_count).sum::<usize>(),
        disc_spec.iter().map(LayerSpec::param_count).sum::<usize>(),
    ];
    if counts != expected_counts {
        return Err(FormatError::ShapeInconsistency(format!(
            "header declares {counts:?} parameters, layer specs need {expected_counts:?}"
        ))
        .into());
    }
    let expected = 8 * (counts[0] + counts[1]);
    if payload.len() != expected {
        return Err(FormatError::Truncated {
            expected,
            found: payload.len(),
        }
        .into());
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let (g, d) = values.split_at(counts[0]);
    Ok(Snapshot {
        step,
        gen: NetParams::from_flat(&gen_spec, g.to_vec())?,
        disc: NetParams::from_flat(&disc_spec, d.to_vec())?,
    })
}

pub fn write_checkpoint(snapshot: &Snapshot, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_checkpoint(snapshot))?;
    f.sync_all()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Snapshot> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_checkpoint(&bytes)
}

pub fn checkpoint_file_name(step: usize) -> String {
    format!("step_{step}.ckpt")
}

/// Writes every snapshot into `dir` as `step_<N>.ckpt`.
pub fn write_snapshot_dir(snapshots: &[Snapshot], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    snapshots
        .iter()
        .map(|s| {
            let path = dir.join(checkpoint_file_name(s.step));
            write_checkpoint(s, &path)?;
            Ok(path)
        })
        .collect()
}

/// Reads every `step_<N>.ckpt` in `dir`, ordered by step.
pub fn read_snapshot_dir(dir: &Path) -> Result<Vec<Snapshot>> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let step = name
            .strip_prefix("step_")
            .and_then(|s| s.strip_suffix(".ckpt"))
            .and_then(|s| s.parse::<usize>().ok());
        if let Some(step) = step {
            found.push((step, path));
        }
    }
    found.sort();
    found
        .into_iter()
        .map(|(step, path)| {
            let snap = read_checkpoint(&path)?;
            if snap.step != step {
                return Err(FormatError::Header(format!("{} holds step {}", path.display(), snap.step)).into());
            }
            Ok(snap)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub step: usize,
    pub gen_loss: f64,
    pub disc_loss: f64,
}

impl From<&LossRow> for TrainLogRow {
    fn from(r: &LossRow) -> Self {
        Self {
            step: r.step,
            gen_loss: r.gen_loss,
            disc_loss: r.disc_loss,
        }
    }
}

/// One row of `dg_report.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgReportRow {
    pub step: usize,
    pub minimax: f64,
    pub maximin: f64,
    pub dg: f64,
    pub modes: usize,
    pub std3: usize,
    pub total: usize,
    pub k: usize,
    pub n_adv: usize,
    pub n_test: usize,
    pub seed: u64,
    pub wall_ms: u128,
}

/// Writes rows with a header line; floats use the shortest representation that parses back exactly.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes rows to a CSV file, including the header when there are no rows.
pub fn write_csv_file<T: Serialize>(rows: &[T], header: &[&str], path: &Path) -> Result<()> {
    if rows.is_empty() {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        w.flush()?;
        return Ok(());
    }
    write_csv(rows, fs::File::create(path)?)
}

pub fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(reader: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub const TRAIN_LOG_HEADER: [&str; 3] = ["step", "gen_loss", "disc_loss"];
pub const DG_REPORT_HEADER: [&str; 12] = [
    "step", "minimax", "maximin", "dg", "modes", "std3", "total", "k", "n_adv", "n_test", "seed", "wall_ms",
];

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// later duplicates override earlier ones.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| FormatError::Config {
            line: i + 1,
            message: format!("expected `key = value`, got {line:?}"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(FormatError::Config {
                line: i + 1,
                message: format!("invalid key {k:?}"),
            }
            .into());
        }
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

/// Typed lookup into a parsed config; `None` when the key is absent.
pub fn config_value<T: std::str::FromStr>(cfg: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    cfg.get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| Error::Config(format!("cannot parse {key} = {v:?}")))
        })
        .transpose()
}

/// Record of one command invocation, written before any long computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub tool_version: String,
    pub config: BTreeMap<String, String>,
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: BTreeMap<String, String>) -> Self {
        Self {
            run_id: format!("{command}-seed{seed}"),
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            artifacts: BTreeMap::new(),
        }
    }

    /// Writes `manifest.json` into `dir`. If a manifest with the same id
    /// already exists, a numeric suffix keeps the id unique.
    pub fn write_into(&mut self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(old) = serde_json::from_str::<RunManifest>(&text) {
                if old.run_id.starts_with(&self.run_id) && old.config != self.config {
                    let n = old
                        .run_id
                        .rsplit_once('-')
                        .and_then(|(_, s)| s.strip_prefix('r'))
                        .and_then(|s| s.parse::<u32>().ok())
                        .unwrap_or(0);
                    self.run_id = format!("{}-r{}", self.run_id, n + 1);
                } else if old.config == self.config {
                    self.run_id = old.run_id;
                }
            }
        }
        fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Keys understood by [`apply_train_entries`].
pub const TRAIN_KEYS: [&str; 13] = [
    "mixture",
    "lr_g",
    "lr_d",
    "batch_size",
    "latent_dim",
    "total_steps",
    "d_steps_per_g_step",
    "snapshot_every",
    "log_every",
    "seed",
    "gen_loss",
    "latent_prior",
    "epsilon_clip",
];

fn gen_loss_name(mode: GenLoss) -> &'static str {
    match mode {
        GenLoss::Saturating => "saturating",
        GenLoss::NonSaturating => "non-saturating",
    }
}

fn prior_name(prior: LatentPrior) -> &'static str {
    match prior {
        LatentPrior::StdNormal => "normal",
        LatentPrior::Uniform => "uniform",
    }
}

/// Flat key-value view of a training configuration.
pub fn train_entries(cfg: &TrainConfig) -> BTreeMap<String, String> {
    let pairs = [
        ("mixture", cfg.mixture.name().to_string()),
        ("lr_g", cfg.lr_g.to_string()),
        ("lr_d", cfg.lr_d.to_string()),
        ("batch_size", cfg.batch_size.to_string()),
        ("latent_dim", cfg.latent_dim().to_string()),
        ("total_steps", cfg.total_steps.to_string()),
        ("d_steps_per_g_step", cfg.d_steps_per_g_step.to_string()),
        ("snapshot_every", cfg.snapshot_every.to_string()),
        ("log_every", cfg.log_every.to_string()),
        ("seed", cfg.seed.to_string()),
        ("gen_loss", gen_loss_name(cfg.gen_loss_mode).to_string()),
        ("latent_prior", prior_name(cfg.game.latent_prior).to_string()),
        ("epsilon_clip", cfg.game.epsilon_clip.to_string()),
    ];
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Applies entries produced by [`train_entries`] or read from a config file.
/// Keys outside `TRAIN_KEYS` and `extra_keys` are rejected.
pub fn apply_train_entries(
    cfg: &mut TrainConfig,
    entries: &BTreeMap<String, String>,
    extra_keys: &[&str],
) -> Result<()> {
    if let Some(k) = entries
        .keys()
        .find(|k| !TRAIN_KEYS.contains(&k.as_str()) && !extra_keys.contains(&k.as_str()))
    {
        return Err(Error::Config(format!("unknown key {k:?}")));
    }
    if let Some(name) = entries.get("mixture") {
        cfg.mixture = MixtureKind::parse(name).ok_or_else(|| Error::Config(format!("unknown mixture {name:?}")))?;
    }
    macro_rules! set {
        ($($key:literal => $field:expr),*) => {
            $(if let Some(v) = config_value(entries, $key)? { $field = v; })*
        };
    }
    set!("lr_g" => cfg.lr_g, "lr_d" => cfg.lr_d, "batch_size" => cfg.batch_size, "total_steps" => cfg.total_steps,
        "d_steps_per_g_step" => cfg.d_steps_per_g_step, "snapshot_every" => cfg.snapshot_every,
        "log_every" => cfg.log_every, "seed" => cfg.seed);
    if let Some(name) = entries.get("gen_loss") {
        cfg.gen_loss_mode = match name.as_str() {
            "saturating" => GenLoss::Saturating,
            "non-saturating" => GenLoss::NonSaturating,
            _ => return Err(Error::Config(format!("unknown gen_loss {name:?}"))),
        };
    }
    let mut prior = cfg.game.latent_prior;
    if let Some(name) = entries.get("latent_prior") {
        prior = match name.as_str() {
            "normal" => LatentPrior::StdNormal,
            "uniform" => LatentPrior::Uniform,
            _ => return Err(Error::Config(format!("unknown latent_prior {name:?}"))),
        };
    }
    let latent_dim = config_value(entries, "latent_dim")?.unwrap_or(cfg.latent_dim());
    let eps = config_value(entries, "epsilon_clip")?.unwrap_or(cfg.game.epsilon_clip);
    if latent_dim == 0 {
        return Err(Error::Config("latent_dim must be at least 1".into()));
    }
    let toy = GanGame::toy(cfg.mixture.build().dim(), latent_dim);
    cfg.game = GanGame::new(toy.generator_spec, toy.discriminator_spec, prior, eps)?;
    cfg.validate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GanGame;
    use crate::net::{mlp_spec, InitScheme};
    use crate::rng::stream;
    use proptest::prelude::*;

    fn snapshot(seed: u64) -> Snapshot {
        let game = GanGame::toy(2, 5);
        let mut rng = stream(seed, 0);
        Snapshot {
            step: 250,
            gen: NetParams::init(&game.generator_spec, InitScheme::XavierUniform, &mut rng).unwrap(),
            disc: NetParams::init(&game.discriminator_spec, InitScheme::Normal(0.3), &mut rng).unwrap(),
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut snap = snapshot(1);
        snap.gen.as_mut_slice()[3] = -0.0;
        snap.gen.as_mut_slice()[4] = f64::MIN_POSITIVE / 3.0;
        let path = dir.path().join("a.ckpt");
        write_checkpoint(&snap, &path).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back.step, 250);
        assert_eq!(back.gen.spec(), snap.gen.spec());
        for (a, b) in back
            .gen
            .as_slice()
            .iter()
            .chain(back.disc.as_slice())
            .zip(snap.gen.as_slice().iter().chain(snap.disc.as_slice()))
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn checkpoint_errors_are_distinct() {
        let bytes = encode_checkpoint(&snapshot(2));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode_checkpoint(&bad),
            Err(Error::Format(FormatError::BadMagic))
        ));
        let text = String::from_utf8_lossy(&bytes[..40]).replace("version = 1", "version = 7");
        let mut future = text.into_bytes();
        future.extend_from_slice(&bytes[40..]);
        assert!(matches!(
            decode_checkpoint(&future),
            Err(Error::Format(FormatError::UnsupportedVersion {
                found: 7,
                supported: 1
            }))
        ));
        assert!(matches!(
            decode_checkpoint(&bytes[..bytes.len() - 5]),
            Err(Error::Format(FormatError::Truncated { .. }))
        ));
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let start = text.find("gen = ").unwrap();
        let mut shaped = bytes.clone();
        shaped[start + 6] = b'6';
        assert!(matches!(
            decode_checkpoint(&shaped),
            Err(Error::Format(FormatError::ShapeInconsistency(_)))
        ));
        assert!(matches!(
            decode_checkpoint(b"DUALGAP-CKPT\nversion = 1\n"),
            Err(Error::Format(FormatError::Header(_)))
        ));
    }

    #[test]
    fn snapshot_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let snaps: Vec<Snapshot> = [0, 500, 250]
            .iter()
            .map(|&s| Snapshot {
                step: s,
                ..snapshot(s as u64)
            })
            .collect();
        write_snapshot_dir(&snaps, dir.path()).unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let back = read_snapshot_dir(dir.path()).unwrap();
        assert_eq!(back.iter().map(|s| s.step).collect::<Vec<_>>(), vec![0, 250, 500]);
        assert_eq!(back[2], snaps[1]);
    }

    #[test]
    fn csv_tables_round_trip() {
        let rows = vec![
            DgReportRow {
                step: 0,
                minimax: -0.1 - 0.2,
                maximin: 1e-300,
                dg: 0.1 + 0.7,
                modes: 8,
                std3: 2400,
                total: 2500,
                k: 500,
                n_adv: 3000,
                n_test: 400,
                seed: 7,
                wall_ms: 12,
            },
            DgReportRow {
                step: 250,
                minimax: std::f64::consts::PI,
                maximin: -0.0,
                dg: 1.0 / 3.0,
                modes: 0,
                std3: 0,
                total: 2500,
                k: 0,
                n_adv: 1,
                n_test: 1,
                seed: u64::MAX,
                wall_ms: 0,
            },
        ];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), DG_REPORT_HEADER.join(","));
        let back: Vec<DgReportRow> = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back.iter().zip(&rows) {
            assert_eq!(a.minimax.to_bits(), b.minimax.to_bits());
            assert_eq!(a.dg.to_bits(), b.dg.to_bits());
            assert_eq!(a.seed, b.seed);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv_file::<TrainLogRow>(&[], &TRAIN_LOG_HEADER, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().trim(), "step,gen_loss,disc_loss");
    }

    #[test]
    fn config_parsing() {
        let cfg = parse_config("# comment\nlr_g = 1e-3\n\n  seed=4  # trailing\nlr_g = 2e-3\n").unwrap();
        assert_eq!(config_value::<f64>(&cfg, "lr_g").unwrap(), Some(2e-3));
        assert_eq!(config_value::<u64>(&cfg, "seed").unwrap(), Some(4));
        assert_eq!(config_value::<u64>(&cfg, "missing").unwrap(), None);
        assert!(config_value::<u64>(&cfg, "lr_g").is_err());
        assert!(matches!(
            parse_config("a = 1\nno equals here\n"),
            Err(Error::Format(FormatError::Config { line: 2, .. }))
        ));
        assert!(parse_config("two words = 1").is_err());
    }

    #[test]
    fn manifest_ids_stay_unique() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = |v: &str| BTreeMap::from([("lr_g".to_string(), v.to_string())]);
        let mut a = RunManifest::new("train", 0, cfg("1e-3"));
        a.write_into(dir.path()).unwrap();
        let mut same = RunManifest::new("train", 0, cfg("1e-3"));
        same.write_into(dir.path()).unwrap();
        assert_eq!(same.run_id, a.run_id);
        let mut b = RunManifest::new("train", 0, cfg("2e-3"));
        b.write_into(dir.path()).unwrap();
        assert_ne!(b.run_id, a.run_id);
        assert_eq!(RunManifest::read(&dir.path().join("manifest.json")).unwrap(), b);
    }

    #[test]
    fn train_entries_round_trip() {
        use crate::train::Preset;
        let mut cfg = TrainConfig::preset(Preset::SpiralUnstable);
        cfg.seed = 11;
        cfg.gen_loss_mode = GenLoss::Saturating;
        let entries = train_entries(&cfg);
        let mut other = TrainConfig::preset(Preset::RingStable);
        apply_train_entries(&mut other, &entries, &[]).unwrap();
        assert_eq!(other, cfg);
        let text = "mixture = grid\nlatent_dim = 8\nlatent_prior = uniform\n";
        apply_train_entries(&mut other, &parse_config(text).unwrap(), &[]).unwrap();
        assert_eq!(other.game.generator_spec[0].in_dim, 8);
        assert_eq!(other.game.discriminator_spec[0].in_dim, 2);
        assert_eq!(other.game.latent_prior, LatentPrior::Uniform);
        let bad = parse_config("n_train = 5").unwrap();
        assert!(apply_train_entries(&mut other, &bad, &[]).is_err());
        assert!(apply_train_entries(&mut other, &bad, &["n_train"]).is_ok());
        assert!(apply_train_entries(&mut other, &parse_config("lr_g = -1").unwrap(), &[]).is_err());
        assert!(apply_train_entries(&mut other, &parse_config("gen_loss = wasserstein").unwrap(), &[]).is_err());
    }

    proptest! {
        #[test]
        fn checkpoint_round_trip_any_values(values in prop::collection::vec(any::<f64>(), 17), step in 0usize..1_000_000) {
            let spec = mlp_spec(2, &[3], 2, crate::net::Activation::LeakyRelu(0.2), crate::net::Activation::Identity);
            let gen = NetParams::from_flat(&spec, values.clone()).unwrap();
            let disc = NetParams::from_flat(&spec, values.iter().rev().cloned().collect()).unwrap();
            let snap = Snapshot { step, gen, disc };
            let back = decode_checkpoint(&encode_checkpoint(&snap)).unwrap();
            prop_assert_eq!(back.step, step);
            for (a, b) in back.gen.as_slice().iter().zip(snap.gen.as_slice()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn train_log_rows_round_trip(rows in prop::collection::vec((0usize..100000, any::<f64>(), any::<f64>()), 0..20)) {
            let rows: Vec<TrainLogRow> = rows.into_iter().map(|(step, g, d)| TrainLogRow { step, gen_loss: g, disc_loss: d }).collect();
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf).unwrap();
            let back: Vec<TrainLogRow> = read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), rows.len());
            for (a, b) in back.iter().zip(&rows) {
                prop_assert!(a.gen_loss.to_bits() == b.gen_loss.to_bits() || (a.gen_loss.is_nan() && b.gen_loss.is_nan()));
                prop_assert!(a.disc_loss.to_bits() == b.disc_loss.to_bits() || (a.disc_loss.is_nan() && b.disc_loss.is_nan()));
            }
        }
    }
}
