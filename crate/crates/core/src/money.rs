//! Exact fixed-point money.
//!
//! Amounts are stored as integer thousandths of the $1,000 unit used throughout
//! the cost model, so one [`Money`] tick equals one dollar. Comparisons inside the
//! search are therefore exact and deterministic.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Ticks per $1,000 unit.
pub const TICKS_PER_UNIT: i64 = 1000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_ticks(ticks: i64) -> Self {
        Money(ticks)
    }

    pub const fn ticks(self) -> i64 {
        self.0
    }

    /// Whole $1,000 units.
    pub const fn from_units(units: i64) -> Self {
        Money(units * TICKS_PER_UNIT)
    }

    /// Rounds a value in $1,000 units to the nearest tick.
    pub fn from_units_f64(units: f64) -> Self {
        Money::round_ticks(units * TICKS_PER_UNIT as f64)
    }

    /// Rounds a value expressed in ticks, half away from zero.
    pub fn round_ticks(ticks: f64) -> Self {
        Money(ticks.round() as i64)
    }

    /// Value in $1,000 units.
    pub fn units(self) -> f64 {
        self.0 as f64 / TICKS_PER_UNIT as f64
    }

    /// Multiplies by a dimensionless factor, rounding to the nearest tick.
    pub fn scale(self, factor: f64) -> Self {
        Money::round_ticks(self.0 as f64 * factor)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(
            f,
            "{sign}{}.{:03}",
            abs / TICKS_PER_UNIT as u64,
            abs % TICKS_PER_UNIT as u64
        )
    }
}

// Serialized as a decimal number of $1,000 units.
impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.units())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let units = f64::deserialize(deserializer)?;
        if !units.is_finite() {
            return Err(serde::de::Error::custom("money must be finite"));
        }
        Ok(Money::from_units_f64(units))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalized_rework_is_exact() {
        assert_eq!(Money::from_units(740).scale(1.5), Money::from_units(1110));
        assert_eq!(Money::from_units(740).scale(1.11).ticks(), 821_400);
    }

    #[test]
    fn display_keeps_three_decimals() {
        assert_eq!(Money::from_ticks(18_850_000).to_string(), "18850.000");
        assert_eq!(Money::from_ticks(-350_500).to_string(), "-350.500");
    }

    #[test]
    fn serde_uses_units() {
        let json = serde_json::to_string(&Money::from_units(20_000)).unwrap();
        assert_eq!(json, "20000.0");
        let back: Money = serde_json::from_str("0.001").unwrap();
        assert_eq!(back, Money::from_ticks(1));
    }
}
