//! Draw seeded channels, build eigen combiners, and round-trip a channel dump.
//!
//! Run: `cargo run --example channel_dump`

use flatprec::channel::{gen_multipath, gen_rayleigh, ChannelSet, EffectiveChannel, SystemDims};

fn main() -> flatprec::Result<()> {
    let dims = SystemDims::new(16, 3, 2, 1)?;
    let ch = gen_rayleigh(dims, 1.0, 7)?;
    let again = gen_rayleigh(dims, 1.0, 7)?;
    assert_eq!(ch.per_ue, again.per_ue, "same seed, same channel");

    let eff = EffectiveChannel::eigen(&ch, dims.n_layers)?;
    println!("H~ is {}x{} ({} layers)", eff.h_tilde.nrows(), eff.h_tilde.ncols(), eff.total_layers());
    for (k, w) in eff.combiners.iter().enumerate() {
        println!("UE {k}: combiner norm {:.6}", w.norm());
    }

    // Correlated stress case: a few plane waves per UE.
    let mp = gen_multipath(dims, 1.0, 3, 7)?;
    let sv = mp.stacked().singular_values();
    println!("multipath singular value spread: {:.3e}", sv.max() / sv.min());

    let mut buf = Vec::new();
    ch.write_csv(&mut buf, 7)?;
    let (back, seed) = ChannelSet::read_csv(buf.as_slice())?;
    assert_eq!(seed, 7);
    let err = (back.stacked() - ch.stacked()).norm();
    println!("dump is {} bytes, roundtrip error {err:.1e}", buf.len());
    println!("{}", String::from_utf8_lossy(&buf).lines().take(3).collect::<Vec<_>>().join("\n"));
    Ok(())
}
