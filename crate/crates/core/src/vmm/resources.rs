use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign};

/// The four resource dimensions a node offers and a session consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ResourceKind {
    Cpu = 0,
    Mem = 1,
    Net = 2,
    Storage = 3,
}

impl ResourceKind {
    pub const ALL: [ResourceKind; 4] = [
        ResourceKind::Cpu,
        ResourceKind::Mem,
        ResourceKind::Net,
        ResourceKind::Storage,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ResourceKind::Cpu => "cpu",
            ResourceKind::Mem => "mem",
            ResourceKind::Net => "net",
            ResourceKind::Storage => "storage",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// CPU in milli-cores, memory in MiB, network in Mbit/s, storage in GiB.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ResourceVector {
    pub cpu: u64,
    pub mem: u64,
    pub net: u64,
    pub storage: u64,
}

impl ResourceVector {
    pub const ZERO: ResourceVector = ResourceVector {
        cpu: 0,
        mem: 0,
        net: 0,
        storage: 0,
    };

    pub fn new(cpu: u64, mem: u64, net: u64, storage: u64) -> Self {
        Self {
            cpu,
            mem,
            net,
            storage,
        }
    }

    pub fn get(&self, kind: ResourceKind) -> u64 {
        match kind {
            ResourceKind::Cpu => self.cpu,
            ResourceKind::Mem => self.mem,
            ResourceKind::Net => self.net,
            ResourceKind::Storage => self.storage,
        }
    }

    pub fn set(&mut self, kind: ResourceKind, value: u64) {
        match kind {
            ResourceKind::Cpu => self.cpu = value,
            ResourceKind::Mem => self.mem = value,
            ResourceKind::Net => self.net = value,
            ResourceKind::Storage => self.storage = value,
        }
    }

    pub fn to_array(&self) -> [u64; 4] {
        [self.cpu, self.mem, self.net, self.storage]
    }

    pub fn from_array(a: [u64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    fn zip(self, other: Self, f: impl Fn(u64, u64) -> u64) -> Self {
        let (a, b) = (self.to_array(), other.to_array());
        Self::from_array([f(a[0], b[0]), f(a[1], b[1]), f(a[2], b[2]), f(a[3], b[3])])
    }

    pub fn saturating_sub(self, other: Self) -> Self {
        self.zip(other, u64::saturating_sub)
    }

    pub fn checked_sub(self, other: Self) -> Option<Self> {
        other.fits_within(&self).then(|| self.saturating_sub(other))
    }

    pub fn scale(self, factor: u64) -> Self {
        self.zip(Self::ZERO, |a, _| a * factor)
    }

    /// Componentwise `self ≤ other`.
    pub fn fits_within(&self, other: &Self) -> bool {
        ResourceKind::ALL
            .iter()
            .all(|&k| self.get(k) <= other.get(k))
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }
}

impl Add for ResourceVector {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        self.zip(rhs, u64::saturating_add)
    }
}

impl AddAssign for ResourceVector {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for ResourceVector {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, Add::add)
    }
}

impl fmt::Display for ResourceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cpu={}m mem={}MiB net={}Mbps storage={}GiB",
            self.cpu, self.mem, self.net, self.storage
        )
    }
}

/// Exact non-negative fraction, ordered by value.
#[derive(Debug, Clone, Copy)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };

    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "ratio with zero denominator");
        Self { num, den }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ratio {}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

/// Minimum over resource kinds with non-zero capacity of `part[k] / capacity[k]`.
///
/// Kinds a node does not offer at all are ignored; a node offering nothing scores zero.
pub fn min_ratio(part: &ResourceVector, capacity: &ResourceVector) -> Ratio {
    ResourceKind::ALL
        .iter()
        .filter(|&&k| capacity.get(k) > 0)
        .map(|&k| Ratio::new(part.get(k), capacity.get(k)))
        .min()
        .unwrap_or(Ratio::ZERO)
}
