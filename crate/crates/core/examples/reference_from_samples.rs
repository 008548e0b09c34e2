//! Merges several misaligned nominal scans into one reference: each scan is
//! denoised, registered onto the first, voxel-averaged and thinned by voxel
//! occupancy.
//!
//! cargo run --release --example reference_from_samples

use tanksweep::reference::{build_from_samples, RegistrationTarget, SampleMergeParams};
use tanksweep::scenegen::{nominal_scans, random_perturbation, SceneSpec};

fn main() -> tanksweep::Result<()> {
    let spec = SceneSpec::default();
    let samples: Vec<_> = nominal_scans(&spec, 4, 40)?
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            if i == 0 {
                s
            } else {
                // the robot never parks in exactly the same pose
                s.transformed(&random_perturbation(&spec, 3f64.to_radians(), 0.05, i as u64))
            }
        })
        .collect();
    for (i, s) in samples.iter().enumerate() {
        println!("sample {i}: {} points", s.len());
    }

    let params = SampleMergeParams::default();
    let reference = build_from_samples(&samples, RegistrationTarget::FirstSample, None, &params)?;
    let counts = reference.occupancy_counts();
    let max = counts.iter().max().copied().unwrap_or(0);
    println!(
        "reference: {} voxels of {} m, occupancy 1..={max}",
        reference.len(),
        params.voxel_size
    );
    Ok(())
}
