use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Interfering technologies the classifier can attribute a burst to.
///
/// The declaration order is significant: it is the wire encoding of the
/// technology field and the tie-break order for classifier argmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Technology {
    Wlan11b,
    Wlan11g,
    Wlan11n,
    Bt802151,
    Ble,
    Zigbee802154,
}

impl Technology {
    pub const COUNT: usize = 6;

    pub const ALL: [Technology; Technology::COUNT] = [
        Technology::Wlan11b,
        Technology::Wlan11g,
        Technology::Wlan11n,
        Technology::Bt802151,
        Technology::Ble,
        Technology::Zigbee802154,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Technology> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Technology::Wlan11b => "Wlan11b",
            Technology::Wlan11g => "Wlan11g",
            Technology::Wlan11n => "Wlan11n",
            Technology::Bt802151 => "Bt802151",
            Technology::Ble => "Ble",
            Technology::Zigbee802154 => "Zigbee802154",
        }
    }

    pub fn is_wlan(self) -> bool {
        matches!(self, Technology::Wlan11b | Technology::Wlan11g | Technology::Wlan11n)
    }
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown technology `{0}`")]
pub struct UnknownTechnology(pub String);

impl FromStr for Technology {
    type Err = UnknownTechnology;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Technology::ALL
            .iter()
            .copied()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownTechnology(s.to_string()))
    }
}

/// A set of technologies, used wherever maps or spectrograms aggregate
/// over a technology family (all WLAN amendments, for instance).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TechSet(u8);

impl TechSet {
    pub fn empty() -> Self {
        TechSet(0)
    }

    pub fn all() -> Self {
        TechSet((1 << Technology::COUNT) - 1)
    }

    pub fn only(tech: Technology) -> Self {
        TechSet(1 << tech.index())
    }

    pub fn wlan() -> Self {
        Self::from_iter([Technology::Wlan11b, Technology::Wlan11g, Technology::Wlan11n])
    }

    pub fn insert(&mut self, tech: Technology) {
        self.0 |= 1 << tech.index();
    }

    pub fn contains(self, tech: Technology) -> bool {
        self.0 & (1 << tech.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Technology> {
        Technology::ALL.into_iter().filter(move |t| self.contains(*t))
    }

    /// Parses a single technology name or a family alias
    /// (`wlan`, `bt`, `ble`, `zigbee`, `all`).
    pub fn parse(s: &str) -> Result<Self, UnknownTechnology> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(Self::all()),
            "wlan" | "wifi" | "802.11" => Ok(Self::wlan()),
            "bt" | "bluetooth" | "802.15.1" => Ok(Self::only(Technology::Bt802151)),
            "ble" => Ok(Self::only(Technology::Ble)),
            "zigbee" | "802.15.4" => Ok(Self::only(Technology::Zigbee802154)),
            _ => s.parse().map(Self::only),
        }
    }
}

impl FromIterator<Technology> for TechSet {
    fn from_iter<I: IntoIterator<Item = Technology>>(iter: I) -> Self {
        let mut set = TechSet::empty();
        for t in iter {
            set.insert(t);
        }
        set
    }
}
