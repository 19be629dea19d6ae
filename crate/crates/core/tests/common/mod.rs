//! Shared fixtures for integration tests.

#![allow(dead_code, clippy::approx_constant)]

pub struct Fixture {
    pub a: &'static [f64],
    pub b: &'static [f64],
    pub t: f64,
    pub dof: f64,
    pub p: f64,
    pub d: f64,
}

// reference values computed offline with an independent statistics package
pub const FIXTURES: [Fixture; 10] = [
    Fixture {
        a: &[0.5514, 0.5821, 0.5573],
        b: &[0.4611, 0.4443, 0.5027],
        t: 4.773152404754553,
        dof: 3.08122326874593,
        p: 0.016438867487415937,
        d: 3.897262618729046,
    },
    Fixture {
        a: &[0.5603, 0.5356, 0.6267],
        b: &[0.5275, 0.522, 0.4534, 0.4346, 0.5642],
        t: 2.024964341787268,
        dof: 4.904322248693925,
        p: 0.09984855043695193,
        d: 1.4192717841127827,
    },
    Fixture {
        a: &[0.5044, 0.573, 0.3761, 0.4607],
        b: &[0.4025, 0.4335, 0.5342, 0.3912],
        t: 0.7272701735449072,
        dof: 5.6920498117979115,
        p: 0.4958698492677093,
        d: 0.5142576714683211,
    },
    Fixture {
        a: &[0.4412, 0.518, 0.4265, 0.4722, 0.4756],
        b: &[0.4993, 0.4398, 0.4891, 0.474, 0.4997, 0.4857, 0.586],
        t: -1.2775990385523226,
        dof: 9.807168144976222,
        p: 0.23080448771114973,
        d: -0.7176988499138857,
    },
    Fixture {
        a: &[0.4137, 0.6559, 0.4477, 0.3755, 0.6575, 0.4429],
        b: &[0.429, 0.3489, 0.2921],
        t: 2.1998451866829947,
        dof: 6.723162046757105,
        p: 0.06531453287708948,
        d: 1.2718152919932808,
    },
    Fixture {
        a: &[0.5951, 0.3252, 0.6167, 0.7772, 0.4828, 0.331, 0.5591, 0.6143],
        b: &[0.4264, 0.4516, 0.5702, 0.5639, 0.5139, 0.372, 0.4452, 0.5043],
        t: 0.9551985373386209,
        dof: 9.7405879490152,
        p: 0.3625816301509309,
        d: 0.47759926866931046,
    },
    Fixture {
        a: &[0.464, 0.3963, 0.3699, 0.3926, 0.3858, 0.4233, 0.6948, 0.3639, 0.6508, 0.571],
        b: &[0.454, 0.3573, 0.3943, 0.6374, 0.4499, 0.4938],
        t: 0.12219223470034608,
        dof: 12.664747940034177,
        p: 0.9046643785228594,
        d: 0.05940364225467506,
    },
    Fixture {
        a: &[0.626, 0.7006, 0.4549],
        b: &[0.3629, 0.4234, 0.4013, 0.517, 0.4509, 0.4563, 0.446, 0.5651, 0.3703, 0.3774, 0.5274, 0.4183],
        t: 2.0078160078202636,
        dof: 2.2734006377395835,
        p: 0.16689034743660572,
        d: 1.9440612211139718,
    },
    Fixture {
        a: &[0.5758, 0.3469, 0.5049, 0.5907, 0.2212, 0.3541, 0.5888],
        b: &[0.6899, 0.4755, 0.4129, 0.3186, 0.467, 0.1198, 0.4141, 0.3804, 0.3577],
        t: 0.6756149937967973,
        dof: 13.197022186387631,
        p: 0.5109508858545266,
        d: 0.33938451490902577,
    },
    Fixture {
        a: &[1.0337, -0.0689, 0.4949, 0.5159, 0.6075, 0.1316, 0.3927, 0.156, 0.4706, 0.5451, 0.5378, 0.4545],
        b: &[0.4342, 0.4331, 0.4627, 0.4133, 0.1782, 0.3041, 0.4549, 0.2917, 0.3062, 0.4247, 0.4041, 0.5262],
        t: 0.6265117914623493,
        dof: 13.621942716917383,
        p: 0.5413368994360015,
        d: 0.25577236781995627,
    },
];
