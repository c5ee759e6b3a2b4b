//! Parsing of the compact `--channels`, `--df` and `--components` values.

use rapidhare::features::DEFAULT_DIRECTIONAL_LAG;
use rapidhare::{ChannelSpec, ComponentCounts, DirectionalConfig, EmConfig, FeatureConfig};

use crate::{CliError, EmArgs, FeatureArgs};

fn resolve_channel(token: &str, channels: &[ChannelSpec]) -> Result<usize, CliError> {
    let token = token.trim();
    if let Ok(i) = token.parse::<usize>() {
        return if i < channels.len() {
            Ok(i)
        } else {
            Err(CliError::Usage(format!(
                "channel index {i} out of range for {} channels",
                channels.len()
            )))
        };
    }
    channels
        .iter()
        .position(|c| c.name == token)
        .ok_or_else(|| CliError::Usage(format!("unknown channel `{token}`")))
}

pub fn parse_channel_list(list: &str, channels: &[ChannelSpec]) -> Result<Vec<usize>, CliError> {
    list.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| resolve_channel(t, channels))
        .collect()
}

/// `lag=15` or `lag=15,channels=a,b,c`. Bare tokens after `channels=`
/// continue the channel list.
fn parse_df(
    spec: &str,
    channels: &[ChannelSpec],
    keep: Option<&[usize]>,
) -> Result<DirectionalConfig, CliError> {
    let mut lag = DEFAULT_DIRECTIONAL_LAG;
    let mut sources: Option<Vec<usize>> = None;
    let mut in_channels = false;
    for token in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match token.split_once('=') {
            Some(("lag", v)) => {
                in_channels = false;
                lag = v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad directional lag `{v}`")))?;
            }
            Some(("channels", v)) => {
                in_channels = true;
                sources
                    .get_or_insert_with(Vec::new)
                    .push(resolve_channel(v, channels)?);
            }
            None if in_channels => {
                sources
                    .get_or_insert_with(Vec::new)
                    .push(resolve_channel(token, channels)?);
            }
            _ => {
                return Err(CliError::Usage(format!(
                    "bad --df item `{token}`; expected lag=<n> or channels=<list>"
                )))
            }
        }
    }
    match sources {
        Some(s) => Ok(DirectionalConfig::new(lag, s)),
        None => {
            let all = DirectionalConfig::thigh_default(channels, lag)?;
            let sources = all
                .source_channels
                .into_iter()
                .filter(|i| keep.is_none_or(|k| k.contains(i)))
                .collect();
            Ok(DirectionalConfig::new(lag, sources))
        }
    }
}

pub fn feature_config(
    args: &FeatureArgs,
    channels: &[ChannelSpec],
) -> Result<FeatureConfig, CliError> {
    let keep = args
        .channels
        .as_deref()
        .map(|l| parse_channel_list(l, channels))
        .transpose()?;
    let directional = args
        .df
        .as_deref()
        .map(|s| parse_df(s, channels, keep.as_deref()))
        .transpose()?;
    let cfg = FeatureConfig {
        keep_channels: keep,
        directional,
    };
    cfg.validate(channels.len())?;
    Ok(cfg)
}

pub fn component_counts(args: &EmArgs) -> Result<ComponentCounts, CliError> {
    let mut counts = ComponentCounts::default();
    if let Some(spec) = &args.components {
        counts.apply_overrides(spec)?;
    }
    Ok(counts)
}

pub fn em_config(args: &EmArgs, seed: u64) -> Result<EmConfig, CliError> {
    let cfg = EmConfig {
        max_iters: args.max_iters,
        tol: args.tol,
        seed,
        variance_floor: args.variance_floor,
        n_init_restarts: args.restarts,
    };
    cfg.validate()?;
    Ok(cfg)
}
