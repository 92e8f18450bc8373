//! Scenario configuration: a single TOML file describing the flux, the
//! background, kernel choices, soliton data, shelf data and run controls.
//! The parsed scenario re-serializes canonically; its SHA-256 digest stamps
//! every output file so identical scenarios are recognizable byte-for-byte.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use deltasol::dynamics::{Mode, ShelfInit, WidthClosure};
use deltasol::flux::Flux;
use deltasol::hopf::{Background, Datum};
use deltasol::mollifiers::{HeavisideApprox, Mollifier, Orientation};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mode: String,
    pub t_end: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    pub flux: FluxSpec,
    pub background: BackgroundSpec,
    #[serde(default)]
    pub mollifier: MollifierSpec,
    #[serde(default)]
    pub heaviside: HeavisideSpec,
    pub soliton: SolitonSpec,
    #[serde(default)]
    pub shelf: ShelfSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub direct: DirectSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_steps() -> usize {
    200
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FluxSpec {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default)]
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSpec {
    pub preset: String,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub slope: Option<f64>,
    #[serde(default)]
    pub base: Option<f64>,
    #[serde(default)]
    pub amp: Option<f64>,
    #[serde(default)]
    pub steep: Option<f64>,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub center: Option<f64>,
    #[serde(default)]
    pub period: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MollifierSpec {
    pub preset: String,
    #[serde(default)]
    pub sigma: Option<f64>,
}

impl Default for MollifierSpec {
    fn default() -> Self {
        MollifierSpec {
            preset: "sech2_kernel".into(),
            sigma: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HeavisideSpec {
    pub preset: String,
}

impl Default for HeavisideSpec {
    fn default() -> Self {
        HeavisideSpec {
            preset: "sech2".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolitonSpec {
    pub g0: f64,
    pub phi0: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ShelfSpec {
    pub preset: String,
    #[serde(default)]
    pub amp: Option<f64>,
    #[serde(default)]
    pub center: Option<f64>,
    #[serde(default)]
    pub width: Option<f64>,
}

impl Default for ShelfSpec {
    fn default() -> Self {
        ShelfSpec {
            preset: "zero".into(),
            amp: None,
            center: None,
            width: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub eps: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            eps: vec![0.2, 0.1, 0.05, 0.025, 0.0125],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DirectSpec {
    pub eps: f64,
    pub domain: f64,
    pub n: usize,
    pub outputs: usize,
}

impl Default for DirectSpec {
    fn default() -> Self {
        DirectSpec {
            eps: 0.05,
            domain: 40.0,
            n: 8192,
            outputs: 20,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub plots: bool,
    #[serde(default)]
    pub trajectory_rows: Option<usize>,
}

impl Scenario {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let sc: Scenario = toml::from_str(&text).context("config does not parse")?;
        sc.validate()?;
        Ok(sc)
    }

    /// Canonical digest of the parsed scenario.
    pub fn digest(&self) -> String {
        let canon = toml::to_string(self).expect("scenario serializes");
        let mut h = Sha256::new();
        h.update(canon.as_bytes());
        let out = h.finalize();
        let mut s = String::with_capacity(64);
        for b in out {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    pub fn mode(&self) -> Result<Mode> {
        Ok(match self.mode.as_str() {
            "A" | "a" => Mode::A,
            "B" | "b" => Mode::B,
            "C" | "c" => Mode::C,
            "D" | "d" => Mode::D,
            other => bail!("unknown mode {other:?} (expected A, B, C or D)"),
        })
    }

    pub fn flux(&self) -> Result<Flux> {
        if let Some(coeffs) = &self.flux.coeffs {
            if self.flux.preset.is_some() {
                bail!("flux: give either a preset or coefficients, not both");
            }
            return Ok(Flux::new(coeffs.clone()));
        }
        match self.flux.preset.as_deref() {
            Some("u2") | None => Ok(Flux::quadratic()),
            Some("u3") => Ok(Flux::cubic()),
            Some("u2u3") => Ok(Flux::quadratic_cubic(self.flux.beta.unwrap_or(0.1))),
            Some(other) => bail!("unknown flux preset {other:?}"),
        }
    }

    pub fn background(&self) -> Result<Background> {
        let b = &self.background;
        let datum = match b.preset.as_str() {
            "constant" => Datum::Constant {
                value: b.value.context("background.value required")?,
            },
            "linear" => Datum::Linear {
                value_at_origin: b.value.unwrap_or(0.0),
                slope: b.slope.context("background.slope required")?,
            },
            "tanh_ramp" => Datum::TanhRamp {
                base: b.base.context("background.base required")?,
                amp: b.amp.context("background.amp required")?,
                steep: b.steep.context("background.steep required")?,
            },
            "gaussian_bump" => Datum::GaussianBump {
                base: b.base.context("background.base required")?,
                amp: b.amp.context("background.amp required")?,
                width: b.width.context("background.width required")?,
                center: b.center.unwrap_or(0.0),
            },
            "periodic_ramp" => Datum::PeriodicRamp {
                base: b.base.context("background.base required")?,
                amp: b.amp.context("background.amp required")?,
                steep: b.steep.context("background.steep required")?,
                center: b.center.unwrap_or(0.0),
                period: b.period.unwrap_or(self.direct.domain),
            },
            other => bail!("unknown background preset {other:?}"),
        };
        Ok(Background::new(datum, self.flux()?))
    }

    pub fn mollifier(&self) -> Result<Mollifier> {
        match self.mollifier.preset.as_str() {
            "gaussian" => Ok(Mollifier::gaussian(self.mollifier.sigma.unwrap_or(1.0))),
            name => Mollifier::preset(name)
                .with_context(|| format!("unknown mollifier preset {name:?}")),
        }
    }

    pub fn heaviside(&self) -> Result<HeavisideApprox> {
        let gen = Mollifier::preset(&self.heaviside.preset)
            .with_context(|| format!("unknown heaviside preset {:?}", self.heaviside.preset))?;
        let orientation = match self.mode()?.shelf_region() {
            deltasol::dynamics::Region::Ahead => Orientation::Plus,
            deltasol::dynamics::Region::Behind => Orientation::Minus,
        };
        Ok(gen.heaviside(orientation)?)
    }

    /// Shelf initial data; `compat_bump` pins the bump height to the value
    /// emitted at the corner so the field starts continuous.
    pub fn shelf_init(&self, bf: &Background) -> Result<ShelfInit> {
        match self.shelf.preset.as_str() {
            "zero" => Ok(ShelfInit::Zero),
            "bump" => Ok(ShelfInit::Bump {
                amp: self.shelf.amp.context("shelf.amp required")?,
                center: self.shelf.center.context("shelf.center required")?,
                width: self.shelf.width.unwrap_or(1.5),
            }),
            "compat_bump" => {
                let mode = self.mode()?;
                if !matches!(mode, Mode::B | Mode::D) {
                    bail!("shelf preset compat_bump applies to the emitting modes B and D");
                }
                let g0 = self.soliton.g0;
                let phi0 = self.soliton.phi0;
                let u0x = bf.eval_dx(phi0, 0.0)?;
                let g_t0 = -(4.0 / 3.0) * g0 * u0x;
                let amp = -1.5 * 6.0_f64.sqrt() * g_t0 / g0.powf(1.5);
                Ok(ShelfInit::Bump {
                    amp,
                    center: phi0,
                    width: self.shelf.width.unwrap_or(1.5),
                })
            }
            other => bail!("unknown shelf preset {other:?}"),
        }
    }

    pub fn width_closure(&self) -> WidthClosure {
        WidthClosure::SqrtG6
    }

    fn validate(&self) -> Result<()> {
        self.mode()?;
        self.flux()?;
        if self.t_end <= 0.0 {
            bail!("t_end must be positive");
        }
        if self.soliton.g0 <= 0.0 {
            bail!("soliton.g0 must be positive");
        }
        if self.steps == 0 {
            bail!("steps must be positive");
        }
        if self.sweep.eps.is_empty() {
            bail!("sweep.eps must not be empty");
        }
        if self.sweep.eps.iter().any(|&e| e <= 0.0) {
            bail!("sweep.eps entries must be positive");
        }
        let bf = self.background()?;
        let breaking = bf.breaking_time();
        if self.t_end >= breaking {
            bail!("t_end {} is not below the breaking time {breaking}", self.t_end);
        }
        self.mollifier()?;
        self.shelf_init(&bf)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
mode = "B"
t_end = 1.0

[flux]
preset = "u2"

[background]
preset = "tanh_ramp"
base = 0.3
amp = 0.35
steep = 0.9

[soliton]
g0 = 1.0
phi0 = -2.0

[shelf]
preset = "compat_bump"
"#;

    #[test]
    fn sample_round_trips_and_digest_is_stable() {
        let sc: Scenario = toml::from_str(SAMPLE).unwrap();
        sc.validate().unwrap();
        let again: Scenario = toml::from_str(&toml::to_string(&sc).unwrap()).unwrap();
        assert_eq!(sc, again);
        assert_eq!(sc.digest(), again.digest());
        assert_eq!(sc.digest().len(), 64);
    }

    #[test]
    fn empty_sweep_rejected() {
        let mut sc: Scenario = toml::from_str(SAMPLE).unwrap();
        sc.sweep.eps.clear();
        assert!(sc.validate().is_err());
    }

    #[test]
    fn beyond_breaking_rejected() {
        let text = SAMPLE
            .replace("amp = 0.35", "amp = -0.35")
            .replace("t_end = 1.0", "t_end = 50.0");
        let sc: Scenario = toml::from_str(&text).unwrap();
        let err = sc.validate().unwrap_err().to_string();
        assert!(err.contains("breaking"), "{err}");
    }
}
