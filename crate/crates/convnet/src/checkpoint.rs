//! Weight files: a text header naming the schema version, the input shape
//! and every layer, terminated by `end`, followed by the convolution
//! weights and biases as little-endian f64 in layer order.

use std::path::Path;

use crate::network::{ConvParams, LayerSpec, Network, NetworkSpec};
use crate::tensor::Tensor;
use crate::{io_err, ConvnetError, Result};

pub const CHECKPOINT_MAGIC: &str = "ctxaug-weights";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(net: &Network) -> Vec<u8> {
    let [c, h, w] = net.spec.input;
    let mut header = format!("{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}\ninput {c} {h} {w}\n");
    for layer in &net.spec.layers {
        header.push_str(&match *layer {
            LayerSpec::Conv { out_channels, kernel } => format!("layer conv {out_channels} {kernel}\n"),
            LayerSpec::MaxPool { window, stride } => format!("layer pool {window} {stride}\n"),
            LayerSpec::Relu => "layer relu\n".into(),
            LayerSpec::GlobalAvgPool => "layer gap\n".into(),
        });
    }
    for p in &net.params {
        let [o, i, k, _] = p.weights.shape();
        header.push_str(&format!("param {o} {i} {k} {k}\n"));
    }
    header.push_str("end\n");
    let mut out = header.into_bytes();
    for p in &net.params {
        for v in p.weights.data().iter().chain(&p.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn malformed(msg: impl Into<String>) -> ConvnetError {
    ConvnetError::MalformedCheckpoint(msg.into())
}

fn nums(fields: &[&str]) -> Result<Vec<usize>> {
    fields.iter().map(|f| f.parse().map_err(|_| malformed(format!("bad number `{f}`")))).collect()
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Network> {
    let end = bytes.windows(4).position(|w| w == b"end\n").ok_or_else(|| malformed("missing end of header"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| malformed("header is not UTF-8"))?;
    let mut lines = header.lines();
    let expected = format!("{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}");
    match lines.next() {
        Some(l) if l == expected => {}
        Some(l) if l.starts_with(CHECKPOINT_MAGIC) => return Err(malformed(format!("unsupported version `{l}`"))),
        _ => return Err(malformed("not a weight file")),
    }
    let mut input = None;
    let mut layers = Vec::new();
    let mut shapes = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.as_slice() {
            ["input", rest @ ..] if rest.len() == 3 => {
                let n = nums(rest)?;
                input = Some([n[0], n[1], n[2]]);
            }
            ["layer", "conv", rest @ ..] if rest.len() == 2 => {
                let n = nums(rest)?;
                layers.push(LayerSpec::Conv { out_channels: n[0], kernel: n[1] });
            }
            ["layer", "pool", rest @ ..] if rest.len() == 2 => {
                let n = nums(rest)?;
                layers.push(LayerSpec::MaxPool { window: n[0], stride: n[1] });
            }
            ["layer", "relu"] => layers.push(LayerSpec::Relu),
            ["layer", "gap"] => layers.push(LayerSpec::GlobalAvgPool),
            ["param", rest @ ..] if rest.len() == 4 => {
                let n = nums(rest)?;
                shapes.push([n[0], n[1], n[2], n[3]]);
            }
            _ => return Err(malformed(format!("unexpected header line `{line}`"))),
        }
    }
    let spec = NetworkSpec::new(input.ok_or_else(|| malformed("missing input line"))?, layers)?;
    let declared: Vec<[usize; 4]> = spec.conv_shapes().iter().map(|&(o, i, k)| [o, i, k, k]).collect();
    if declared != shapes {
        return Err(malformed("parameter shapes do not match the layers"));
    }
    let mut payload = bytes[end + 4..].chunks_exact(8);
    if !payload.remainder().is_empty() {
        return Err(malformed("payload is not a whole number of f64 values"));
    }
    let needed: usize = shapes.iter().map(|s| s.iter().product::<usize>() + s[0]).sum();
    if payload.len() != needed {
        return Err(malformed(format!("expected {needed} values, found {}", payload.len())));
    }
    let mut take = |n: usize| -> Vec<f64> {
        (0..n).map(|_| f64::from_le_bytes(payload.next().unwrap().try_into().unwrap())).collect()
    };
    let params = shapes
        .iter()
        .map(|&s| {
            let weights = Tensor::new(s, take(s.iter().product())).unwrap();
            ConvParams { weights, bias: take(s[0]) }
        })
        .collect();
    Ok(Network { spec, params })
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(net)).map_err(io_err(path))
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    decode_checkpoint(&std::fs::read(path).map_err(io_err(path))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ctxaug_core::seed::rng_from;

    fn net() -> Network {
        let spec = NetworkSpec::parse("(4) 3c - 2p - (3) 1c", [3, 9, 9]).unwrap();
        let mut n = Network::he_init(spec, &mut rng_from(&[5]));
        n.params[1].bias = vec![0.1, f64::MIN_POSITIVE, -3.5];
        n
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let n = net();
        let bytes = encode_checkpoint(&n);
        assert_eq!(decode_checkpoint(&bytes).unwrap(), n);
        assert_eq!(encode_checkpoint(&decode_checkpoint(&bytes).unwrap()), bytes);
    }

    #[test]
    fn header_is_readable() {
        let bytes = encode_checkpoint(&net());
        let text = String::from_utf8_lossy(&bytes[..bytes.windows(4).position(|w| w == b"end\n").unwrap()]).to_string();
        assert!(text.starts_with("ctxaug-weights v1\ninput 3 9 9\nlayer conv 4 3\nlayer relu\nlayer pool 2 2\n"));
        assert!(text.contains("param 4 3 3 3\nparam 3 4 1 1\n"));
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = encode_checkpoint(&net());
        assert!(decode_checkpoint(&bytes[..bytes.len() - 3]).is_err());
        assert!(decode_checkpoint(&bytes[..bytes.len() - 8]).is_err());
        let mut v2 = bytes.clone();
        v2[16] = b'2';
        assert!(matches!(decode_checkpoint(&v2), Err(ConvnetError::MalformedCheckpoint(m)) if m.contains("version")));
        assert!(decode_checkpoint(b"hello").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        save_checkpoint(&net(), &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), net());
    }
}
