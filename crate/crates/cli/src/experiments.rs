//! Built-in acceptance experiments.

pub struct Experiment {
    pub id: &'static str,
    pub title: &'static str,
    pub description: &'static str,
}

pub const EXPERIMENTS: [Experiment; 8] = [
    Experiment {
        id: "A1",
        title: "fiber baseline",
        description: "z^2, a=3, n=16: Kolmogorov distance of fiber angles to the uniform law <= 2^-15",
    },
    Experiment {
        id: "A2",
        title: "upper bound",
        description: "z^2, a=1, basin(0,inf,0.05), n in [3,18]: C_required stabilizes, fitted lambda in [1.95,2.05]",
    },
    Experiment {
        id: "A3",
        title: "geometrically finite",
        description: "z^2/height and z^2-2/moment(2) vs arcsine: e_n d^n bounded and stabilizing over n in [3,18]",
    },
    Experiment {
        id: "A4",
        title: "lower bound",
        description: "z^2, a=1, basin(0,inf,0.05): inf_{n>=5} e_n 2^n >= 0.5 |g_1(0) - g_1(inf)| > 0",
    },
    Experiment {
        id: "A5",
        title: "oracle consistency",
        description: "z^2: tree pairing and potential-oracle pairing agree within max(1e-9, err_n) for n <= 14",
    },
    Experiment {
        id: "A6",
        title: "DPU sums",
        description: "z^2+i, 20 random x, n in {1e2,1e3,1e4}, N=1: Q_hat finite and within a factor 3 across n",
    },
    Experiment {
        id: "A7",
        title: "contraction and diameters",
        description: "z^2: Bottcher exponent 2 +- 5%; diameter law holds on a held-out half of 50 probes",
    },
    Experiment {
        id: "A8",
        title: "distortion and truncation",
        description: "Koebe ratio bounded, monotone in radius, -> 1 at radius 1e-3; truncated-potential bound for n <= 12",
    },
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_a1_to_a8() {
        let ids: Vec<_> = EXPERIMENTS.iter().map(|e| e.id).collect();
        assert_eq!(ids, ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8"]);
        assert!(EXPERIMENTS[3].title.contains("lower bound"));
    }
}
