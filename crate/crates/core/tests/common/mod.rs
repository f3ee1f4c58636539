#![allow(dead_code)]

use npfusion::{Alpha, Fleet, SensorProfile};
use rand::Rng;

/// Sensor with `(p, q)` uniform on the productive triangle `p > q`.
pub fn random_sensor<R: Rng>(rng: &mut R) -> SensorProfile {
    loop {
        let a: f64 = rng.random();
        let b: f64 = rng.random();
        let (p, q) = if a > b { (a, b) } else { (b, a) };
        if p > q && q > 0.0 && p < 1.0 {
            return SensorProfile::new(p, q).unwrap();
        }
    }
}

pub fn random_fleet<R: Rng>(rng: &mut R, min_n: usize, max_n: usize) -> Fleet {
    let n = rng.random_range(min_n..=max_n);
    Fleet::new((0..n).map(|_| random_sensor(rng)).collect()).unwrap()
}

pub fn random_alpha<R: Rng>(rng: &mut R) -> Alpha {
    Alpha::new(rng.random_range(0.05..0.95)).unwrap()
}

pub fn reference_fleet() -> Fleet {
    Fleet::homogeneous(SensorProfile::new(0.61, 0.39).unwrap(), 4).unwrap()
}
