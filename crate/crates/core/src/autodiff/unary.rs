//! Elementwise functions with closed-form derivative chains.
//!
//! Every function knows its own derivative as another [`UnaryFn`], which is
//! what lets the tape differentiate a gradient graph a second time.

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UnaryFn {
    /// `ln(1 + exp(beta x)) / beta`
    Softplus { beta: f64 },
    /// The `order`-th derivative of `sigmoid(beta x)`, for orders 0 to 3.
    Sigmoid { beta: f64, order: u8 },
    /// `coeff * sin(freq x + quarter * pi / 2)`
    Trig { freq: f64, quarter: u8, coeff: f64 },
    Relu,
    /// Heaviside step, 1 for `x > 0`.
    Step,
    Abs,
    Sign,
    /// Square root clamped at zero.
    Sqrt,
    /// `0.5 / sqrt(x)`, defined as 0 at `x <= 0`.
    SqrtDeriv,
    /// `1 / max(x, floor)`
    Recip { floor: f64 },
    /// `-1 / x^2` above `floor`, 0 below.
    RecipDeriv { floor: f64 },
}

/// Derivative of a [`UnaryFn`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Derivative {
    /// Identically zero almost everywhere.
    Zero,
    Fn(UnaryFn),
    /// Not provided; differentiating through it is a usage error.
    Unsupported,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl UnaryFn {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            UnaryFn::Softplus { beta } => softplus(beta * x) / beta,
            UnaryFn::Sigmoid { beta, order } => {
                let s = sigmoid(beta * x);
                let sc = sigmoid(-beta * x);
                match order {
                    0 => s,
                    1 => beta * s * sc,
                    2 => beta * beta * s * sc * (sc - s),
                    3 => beta * beta * beta * s * sc * (1.0 - 6.0 * s * sc),
                    _ => panic!("sigmoid derivative of order {order} is not available"),
                }
            }
            UnaryFn::Trig {
                freq,
                quarter,
                coeff,
            } => {
                let a = freq * x;
                let v = match quarter % 4 {
                    0 => a.sin(),
                    1 => a.cos(),
                    2 => -a.sin(),
                    _ => -a.cos(),
                };
                coeff * v
            }
            UnaryFn::Relu => x.max(0.0),
            UnaryFn::Step => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            UnaryFn::Abs => x.abs(),
            UnaryFn::Sign => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            UnaryFn::Sqrt => x.max(0.0).sqrt(),
            UnaryFn::SqrtDeriv => {
                if x > 0.0 {
                    0.5 / x.sqrt()
                } else {
                    0.0
                }
            }
            UnaryFn::Recip { floor } => 1.0 / x.max(floor),
            UnaryFn::RecipDeriv { floor } => {
                if x > floor {
                    -1.0 / (x * x)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn derivative(&self) -> Derivative {
        match *self {
            UnaryFn::Softplus { beta } => Derivative::Fn(UnaryFn::Sigmoid { beta, order: 0 }),
            UnaryFn::Sigmoid { beta, order } if order < 3 => Derivative::Fn(UnaryFn::Sigmoid {
                beta,
                order: order + 1,
            }),
            UnaryFn::Sigmoid { .. } => Derivative::Unsupported,
            UnaryFn::Trig {
                freq,
                quarter,
                coeff,
            } => Derivative::Fn(UnaryFn::Trig {
                freq,
                quarter: (quarter + 1) % 4,
                coeff: coeff * freq,
            }),
            UnaryFn::Relu => Derivative::Fn(UnaryFn::Step),
            UnaryFn::Abs => Derivative::Fn(UnaryFn::Sign),
            UnaryFn::Step | UnaryFn::Sign => Derivative::Zero,
            UnaryFn::Sqrt => Derivative::Fn(UnaryFn::SqrtDeriv),
            UnaryFn::Recip { floor } => Derivative::Fn(UnaryFn::RecipDeriv { floor }),
            UnaryFn::SqrtDeriv | UnaryFn::RecipDeriv { .. } => Derivative::Unsupported,
        }
    }
}

/// `sin(freq x)` as a [`UnaryFn`].
pub fn sin(freq: f64) -> UnaryFn {
    UnaryFn::Trig {
        freq,
        quarter: 0,
        coeff: 1.0,
    }
}

/// `cos(freq x)` as a [`UnaryFn`].
pub fn cos(freq: f64) -> UnaryFn {
    UnaryFn::Trig {
        freq,
        quarter: 1,
        coeff: 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_difference(f: UnaryFn, x: f64) -> f64 {
        let h = 1e-6;
        (f.eval(x + h) - f.eval(x - h)) / (2.0 * h)
    }

    #[test]
    fn derivative_chains_match_finite_differences() {
        let fns = [
            UnaryFn::Softplus { beta: 100.0 },
            UnaryFn::Softplus { beta: 1.0 },
            UnaryFn::Sigmoid { beta: 3.0, order: 0 },
            UnaryFn::Sigmoid { beta: 3.0, order: 1 },
            UnaryFn::Sigmoid { beta: 3.0, order: 2 },
            sin(4.0 * std::f64::consts::PI),
            cos(2.0),
            UnaryFn::Sqrt,
            UnaryFn::Recip { floor: 1e-12 },
        ];
        for f in fns {
            let Derivative::Fn(df) = f.derivative() else {
                panic!("{f:?} should have a derivative")
            };
            for &x in &[-0.7, -0.013, 0.021, 0.4, 1.3] {
                if matches!(f, UnaryFn::Sqrt | UnaryFn::Recip { .. }) && x <= 0.0 {
                    continue;
                }
                let fd = central_difference(f, x);
                let an = df.eval(x);
                assert!(
                    (fd - an).abs() <= 1e-6 * (1.0 + an.abs()),
                    "{f:?} at {x}: fd {fd} vs {an}"
                );
            }
        }
    }

    #[test]
    fn sigmoid_is_stable_in_the_tails() {
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!(softplus(800.0).is_finite());
        assert_eq!(softplus(-800.0), 0.0);
    }

    #[test]
    fn quarter_turns_cycle() {
        let f = sin(1.0);
        let mut g = f;
        for _ in 0..4 {
            let Derivative::Fn(next) = g.derivative() else { unreachable!() };
            g = next;
        }
        assert_eq!(g.eval(0.3), f.eval(0.3));
    }
}
