use std::borrow::Cow;

use super::{InputKind, Sampler, SamplerConfig, StepInput, Trajectory, Variant};
use crate::error::{Error, Result};
use crate::forward::GradientOracle;
use crate::rng::RngStream;
use crate::vector::GradientSample;

/// Supplies the pools of L gradient samples consumed by the multi-kernel variant.
pub trait PoolSource {
    /// Next pool, or `None` when the source is exhausted. Sources that hold
    /// their samples lend them rather than copy.
    fn next_pool(&mut self, size: usize, rng: &mut RngStream) -> Option<Result<Vec<Cow<'_, GradientSample>>>>;
}

/// Consecutive, non-overlapping chunks of a sample stream.
pub struct ChunkedPools<I> {
    inner: I,
}

impl<I> ChunkedPools<I> {
    pub fn new(inner: I) -> Self {
        ChunkedPools { inner }
    }
}

impl<I: Iterator<Item = Result<GradientSample>>> PoolSource for ChunkedPools<I> {
    fn next_pool(&mut self, size: usize, _rng: &mut RngStream) -> Option<Result<Vec<Cow<'_, GradientSample>>>> {
        let mut pool = Vec::with_capacity(size);
        for _ in 0..size {
            match self.inner.next()? {
                Ok(s) => pool.push(Cow::Owned(s)),
                Err(e) => return Some(Err(e)),
            }
        }
        Some(Ok(pool))
    }
}

/// Pools drawn with replacement from a buffered set of samples. Never exhausts.
pub struct ResampledPools<'a> {
    buffer: &'a [GradientSample],
}

impl<'a> ResampledPools<'a> {
    pub fn new(buffer: &'a [GradientSample]) -> Result<Self> {
        if buffer.is_empty() {
            return Err(Error::InvalidConfig("resampling buffer is empty".into()));
        }
        Ok(ResampledPools { buffer })
    }
}

impl PoolSource for ResampledPools<'_> {
    fn next_pool(&mut self, size: usize, rng: &mut RngStream) -> Option<Result<Vec<Cow<'_, GradientSample>>>> {
        let n = self.buffer.len();
        Some(Ok((0..size).map(|_| Cow::Borrowed(&self.buffer[rng.index(n)])).collect()))
    }
}

/// Where a sampler gets its gradient information.
pub enum SampleSource<'a> {
    Stream(Box<dyn Iterator<Item = Result<GradientSample>> + 'a>),
    /// Samples held elsewhere, read without copying.
    Borrowed(Box<dyn Iterator<Item = &'a GradientSample> + 'a>),
    Pools(Box<dyn PoolSource + 'a>),
    Oracle(Box<dyn GradientOracle + 'a>),
}

impl<'a> SampleSource<'a> {
    pub fn stream<I>(iter: I) -> Self
    where
        I: Iterator<Item = Result<GradientSample>> + 'a,
    {
        SampleSource::Stream(Box::new(iter))
    }

    pub fn slice(samples: &'a [GradientSample]) -> Self {
        SampleSource::Borrowed(Box::new(samples.iter()))
    }

    pub fn borrowed<I>(iter: I) -> Self
    where
        I: Iterator<Item = &'a GradientSample> + 'a,
    {
        SampleSource::Borrowed(Box::new(iter))
    }

    pub fn pools<P: PoolSource + 'a>(p: P) -> Self {
        SampleSource::Pools(Box::new(p))
    }

    pub fn oracle<O: GradientOracle + 'a>(o: O) -> Self {
        SampleSource::Oracle(Box::new(o))
    }

    fn kind(&self) -> InputKind {
        match self {
            SampleSource::Stream(_) | SampleSource::Borrowed(_) => InputKind::Stream,
            SampleSource::Pools(_) => InputKind::Pool,
            SampleSource::Oracle(_) => InputKind::Oracle,
        }
    }
}

/// Runs `num_steps` steps of `variant` from `cfg.initial`.
pub fn run_sampler(
    variant: Variant,
    source: SampleSource<'_>,
    cfg: &SamplerConfig,
    num_steps: usize,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    match run_sampler_partial(variant, source, cfg, num_steps, rng)? {
        (t, None) => Ok(t),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`run_sampler`], but a failure after the first step still returns the
/// iterates computed so far, alongside the error that stopped the run. The
/// outer error covers configuration problems detected before any step.
pub fn run_sampler_partial(
    variant: Variant,
    source: SampleSource<'_>,
    cfg: &SamplerConfig,
    num_steps: usize,
    rng: &mut RngStream,
) -> Result<(Trajectory, Option<Error>)> {
    let mut sampler = Sampler::new(variant, cfg.clone())?;
    if source.kind() != variant.input_kind() {
        return Err(Error::InvalidConfig(format!(
            "variant {variant} needs a {:?} source, got {:?}",
            variant.input_kind(),
            source.kind()
        )));
    }
    let dim = cfg.dim();
    let mut samples = Vec::with_capacity((num_steps + 1) * dim);
    samples.extend_from_slice(cfg.initial.as_slice());
    let mut current = cfg.initial.clone();
    let exhausted = |k: usize| Error::SourceExhausted {
        consumed: k,
        requested: num_steps,
    };
    let mut source = source;
    let mut failure = None;
    for k in 0..num_steps {
        let next = match &mut source {
            SampleSource::Stream(it) => match it.next() {
                None => Err(exhausted(k)),
                Some(Err(e)) => Err(e),
                Some(Ok(sample)) => sampler.step(&current, StepInput::Sample(&sample), rng),
            },
            SampleSource::Borrowed(it) => match it.next() {
                None => Err(exhausted(k)),
                Some(sample) => sampler.step(&current, StepInput::Sample(sample), rng),
            },
            SampleSource::Pools(p) => match p.next_pool(cfg.pool_size, rng) {
                None => Err(exhausted(k)),
                Some(Err(e)) => Err(e),
                Some(Ok(pool)) => sampler.step(&current, StepInput::Pool(&pool), rng),
            },
            SampleSource::Oracle(o) => sampler.step(&current, StepInput::Oracle(o.as_mut()), rng),
        };
        match next {
            Ok(next) => {
                samples.extend_from_slice(next.as_slice());
                current = next;
            }
            Err(e) => {
                failure = Some(e.at_step(k));
                break;
            }
        }
    }
    Ok((Trajectory::from_run(&sampler, samples, rng.seed())?, failure))
}
