use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const CHANNEL_COUNT: usize = 16;

/// One independently inflatable air channel. The discriminant is the stable
/// wire code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum ChannelId {
    IndexBase = 0,
    IndexTip = 1,
    MiddleBase = 2,
    MiddleTip = 3,
    RingBase = 4,
    RingTip = 5,
    LittleBase = 6,
    LittleTip = 7,
    ThumbProximal = 8,
    ThumbMiddle = 9,
    ThumbDistal = 10,
    ThumbTip = 11,
    PalmBellow = 12,
    AbductionIndexMiddle = 13,
    AbductionMiddleRing = 14,
    AbductionRingLittle = 15,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Finger {
    Index = 0,
    Middle = 1,
    Ring = 2,
    Little = 3,
}

impl Finger {
    pub const ALL: [Finger; 4] = [Finger::Index, Finger::Middle, Finger::Ring, Finger::Little];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn base_channel(self) -> ChannelId {
        ChannelId::ALL[2 * self.index()]
    }

    pub fn tip_channel(self) -> ChannelId {
        ChannelId::ALL[2 * self.index() + 1]
    }

    pub fn name(self) -> &'static str {
        match self {
            Finger::Index => "index",
            Finger::Middle => "middle",
            Finger::Ring => "ring",
            Finger::Little => "little",
        }
    }

    /// Ring and little finger sit on the ulnar palm scaffold.
    pub fn on_ulnar_scaffold(self) -> bool {
        matches!(self, Finger::Ring | Finger::Little)
    }
}

/// What physically sits behind a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    FingerBase(Finger),
    FingerTip(Finger),
    /// Index into the thumb's three bellows (proximal, middle, distal).
    ThumbBellow(usize),
    ThumbTip,
    Palm,
    /// Index into the abduction bellows (index-middle, middle-ring, ring-little).
    Abduction(usize),
}

impl ChannelId {
    pub const ALL: [ChannelId; CHANNEL_COUNT] = [
        ChannelId::IndexBase,
        ChannelId::IndexTip,
        ChannelId::MiddleBase,
        ChannelId::MiddleTip,
        ChannelId::RingBase,
        ChannelId::RingTip,
        ChannelId::LittleBase,
        ChannelId::LittleTip,
        ChannelId::ThumbProximal,
        ChannelId::ThumbMiddle,
        ChannelId::ThumbDistal,
        ChannelId::ThumbTip,
        ChannelId::PalmBellow,
        ChannelId::AbductionIndexMiddle,
        ChannelId::AbductionMiddleRing,
        ChannelId::AbductionRingLittle,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn kind(self) -> ChannelKind {
        use ChannelId::*;
        match self {
            IndexBase | MiddleBase | RingBase | LittleBase => {
                ChannelKind::FingerBase(Finger::ALL[self.index() / 2])
            }
            IndexTip | MiddleTip | RingTip | LittleTip => {
                ChannelKind::FingerTip(Finger::ALL[self.index() / 2])
            }
            ThumbProximal => ChannelKind::ThumbBellow(0),
            ThumbMiddle => ChannelKind::ThumbBellow(1),
            ThumbDistal => ChannelKind::ThumbBellow(2),
            ThumbTip => ChannelKind::ThumbTip,
            PalmBellow => ChannelKind::Palm,
            AbductionIndexMiddle => ChannelKind::Abduction(0),
            AbductionMiddleRing => ChannelKind::Abduction(1),
            AbductionRingLittle => ChannelKind::Abduction(2),
        }
    }

    pub fn is_bellow(self) -> bool {
        matches!(
            self.kind(),
            ChannelKind::ThumbBellow(_) | ChannelKind::Palm | ChannelKind::Abduction(_)
        )
    }

    pub fn name(self) -> &'static str {
        use ChannelId::*;
        match self {
            IndexBase => "index_base",
            IndexTip => "index_tip",
            MiddleBase => "middle_base",
            MiddleTip => "middle_tip",
            RingBase => "ring_base",
            RingTip => "ring_tip",
            LittleBase => "little_base",
            LittleTip => "little_tip",
            ThumbProximal => "thumb_proximal",
            ThumbMiddle => "thumb_middle",
            ThumbDistal => "thumb_distal",
            ThumbTip => "thumb_tip",
            PalmBellow => "palm_bellow",
            AbductionIndexMiddle => "abduction_index_middle",
            AbductionMiddleRing => "abduction_middle_ring",
            AbductionRingLittle => "abduction_ring_little",
        }
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        if let Ok(code) = s.parse::<u8>() {
            return Self::from_code(code)
                .ok_or_else(|| Error::format(format!("unknown channel code {code}")));
        }
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::format(format!("unknown channel `{s}`")))
    }
}
