//! Turns the `[input]` section into signals.

use std::path::Path;

use diner::rng::{substream, Stream};
use diner::signal::{
    load_image, load_image_sequence, make_rank_deficient, permute, random_convex_mix, read_raw_grid, synth,
};
use diner::{GridSignal, Permutation};

use crate::config::{ExperimentConfig, SyntheticInput};
use crate::error::{CliError, Result};

/// File extension of raw grids.
pub const RAW_EXTENSION: &str = "ding";

fn load_path(path: &Path) -> Result<GridSignal> {
    let raw = path.extension().is_some_and(|e| e.eq_ignore_ascii_case(RAW_EXTENSION));
    let loaded = if raw { read_raw_grid(path) } else { load_image(path) };
    loaded.map_err(|e| CliError::data(path.display(), e))
}

fn synthetic_one(s: &SyntheticInput, seed: u64) -> Result<GridSignal> {
    let base_channels = s.rank.unwrap_or(s.channels);
    let mut img = synth::test_image(s.height, s.width, base_channels, seed)?;
    if base_channels < s.channels {
        let mix = random_convex_mix(base_channels, s.channels, &mut substream(seed, Stream::Synthetic));
        img = make_rank_deficient(&img, s.channels, &mix, false)?;
    }
    if s.permute {
        let perm = Permutation::random(img.len(), &mut substream(seed, Stream::Permutation));
        img = permute(&img, &perm)?;
    }
    Ok(img)
}

/// Every signal the input section describes, in order.
pub fn load_signals(cfg: &ExperimentConfig) -> Result<Vec<GridSignal>> {
    let input = &cfg.input;
    if let Some(p) = &input.path {
        return Ok(vec![load_path(p)?]);
    }
    if !input.frames.is_empty() {
        let seq = load_image_sequence(&input.frames).map_err(|e| CliError::data("frames", e))?;
        return Ok(vec![seq]);
    }
    if let Some(s) = &input.synthetic {
        let seed = s.seed.unwrap_or(cfg.seed);
        return (0..s.count as u64)
            .map(|i| synthetic_one(s, seed.wrapping_mul(1000).wrapping_add(i)))
            .collect();
    }
    Err(CliError::Config("no input: set input.path, input.frames or [input.synthetic], or pass --input".into()))
}

/// The single signal of tasks that fit one signal.
pub fn load_single(cfg: &ExperimentConfig) -> Result<GridSignal> {
    let mut all = load_signals(cfg)?;
    if all.len() != 1 {
        return Err(CliError::Config(format!("this task fits one signal, the input describes {}", all.len())));
    }
    Ok(all.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use diner::signal::attribute_rank;

    fn cfg(doc: &str) -> ExperimentConfig {
        ExperimentConfig::parse(doc).unwrap()
    }

    #[test]
    fn synthetic_rank_and_count() {
        let c = cfg("[input.synthetic]\nheight = 12\nwidth = 10\nchannels = 6\nrank = 2\ncount = 3");
        let all = load_signals(&c).unwrap();
        assert_eq!(all.len(), 3);
        for s in &all {
            assert_eq!(s.dims(), &[12, 10]);
            assert_eq!(s.d_out(), 6);
            assert_eq!(attribute_rank(s, 1e-6).unwrap(), 2);
        }
        assert_ne!(all[0], all[1]);
        assert!(matches!(load_single(&c), Err(CliError::Config(_))));
    }

    #[test]
    fn permuted_synthetic_keeps_histogram() {
        let plain = load_single(&cfg("seed = 4\n[input.synthetic]\nheight = 8\nwidth = 8")).unwrap();
        let shuffled = load_single(&cfg("seed = 4\n[input.synthetic]\nheight = 8\nwidth = 8\npermute = true")).unwrap();
        assert_ne!(plain, shuffled);
        let key = |s: &GridSignal| {
            let mut v: Vec<Vec<u64>> = (0..s.len()).map(|i| s.attribute(i).iter().map(|x| x.to_bits()).collect()).collect();
            v.sort();
            v
        };
        assert_eq!(key(&plain), key(&shuffled));
    }

    #[test]
    fn missing_source_is_a_config_error_and_bad_file_a_data_error() {
        assert!(matches!(load_signals(&cfg("")), Err(CliError::Config(_))));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.pgm");
        std::fs::write(&p, b"P7 nonsense").unwrap();
        let mut c = cfg("");
        c.input.path = Some(p);
        assert!(matches!(load_signals(&c), Err(CliError::Data(_))));
    }
}
