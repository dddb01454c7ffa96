use icalign::alignment::ia_3user_closed_form;
use icalign::linalg::{adjoint, inv, singular_values, hstack};
use icalign::metrics::interference_covariance;
use icalign::scenario::{draw_channels, ChannelKind, Scenario};
use ndarray::prelude::*;

fn main() {
    let sc = Scenario {
        users: 3,
        antennas: 4,
        extension: 1,
        streams: vec![2; 3],
        noise_variance: 0.1,
        interference_gain: 1.0,
        max_power: vec![1.0; 3],
        channel_kind: ChannelKind::MimoDense,
    };
    let sigma2 = 1e-9;
    let mut worst: f64 = 0.0;
    let mut worst_high: f64 = 1.0;
    for seed in 0..200u64 {
        let ch = draw_channels(&sc, seed).unwrap();
        let ia = ia_3user_closed_form(&ch).unwrap();
        let mut combiners = Vec::new();
        let mut combiners_high = Vec::new();
        for j in 0..3 {
            let r = interference_covariance(j, &ch, &ia, sigma2);
            let r_inv = inv(&r, "r").unwrap();
            combiners.push(r_inv.dot(&ch.at(j, j).dot(&ia.matrices[j])));
            let rh = interference_covariance(j, &ch, &ia, 1.0);
            let rh_inv = inv(&rh, "r").unwrap();
            combiners_high.push(rh_inv.dot(&ch.at(j, j).dot(&ia.matrices[j])));
        }
        for i in 0..3 {
            let mut mats: Vec<Array2<icalign::C64>> = (0..3)
                .filter(|&j| j != i)
                .map(|j| adjoint(ch.at(j, i)).dot(&combiners[j]))
                .collect();
            // column equilibration
            for m in &mut mats {
                for mut col in m.columns_mut() {
                    let n = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    if n > 0.0 { col.mapv_inplace(|z| z / n); }
                }
            }
            let views: Vec<ArrayView2<icalign::C64>> = mats.iter().map(|m| m.view()).collect();
            let s = singular_values(&hstack(&views)).unwrap();
            let ratio = s[2] / s[0];
            worst = worst.max(ratio);

            // high noise: rank must be 4, check s4/s1 stays big
            let mut mats_h: Vec<Array2<icalign::C64>> = (0..3)
                .filter(|&j| j != i)
                .map(|j| adjoint(ch.at(j, i)).dot(&combiners_high[j]))
                .collect();
            for m in &mut mats_h {
                for mut col in m.columns_mut() {
                    let n = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    if n > 0.0 { col.mapv_inplace(|z| z / n); }
                }
            }
            let views: Vec<ArrayView2<icalign::C64>> = mats_h.iter().map(|m| m.view()).collect();
            let sh = singular_values(&hstack(&views)).unwrap();
            worst_high = worst_high.min(sh[3] / sh[0]);
        }
    }
    println!("equilibrated: worst s3/s1 at 1e-9 over 200 seeds = {worst:.3e}");
    println!("equilibrated: min s4/s1 at sigma2=1 over 200 seeds = {worst_high:.3e}");
}
