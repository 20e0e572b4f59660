use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The fourteen architectural pattern categories a diagram is classified into.
///
/// Declaration order is the on-disk ordinal used by the index format, so it
/// must never be reordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternLabel {
    Broker,
    Layered,
    EventBus,
    PipeAndFilter,
    Repository,
    Microkernel,
    Microservices,
    ModelViewController,
    PeerToPeer,
    PresentationAbstractionController,
    ClientServer,
    SpaceBased,
    Rest,
    PublisherSubscriber,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("unknown pattern label `{given}`; valid labels: {}", PatternLabel::ALL.map(|l| l.as_str()).join(", "))]
pub struct UnknownLabel {
    pub given: String,
}

impl PatternLabel {
    pub const ALL: [PatternLabel; 14] = [
        PatternLabel::Broker,
        PatternLabel::Layered,
        PatternLabel::EventBus,
        PatternLabel::PipeAndFilter,
        PatternLabel::Repository,
        PatternLabel::Microkernel,
        PatternLabel::Microservices,
        PatternLabel::ModelViewController,
        PatternLabel::PeerToPeer,
        PatternLabel::PresentationAbstractionController,
        PatternLabel::ClientServer,
        PatternLabel::SpaceBased,
        PatternLabel::Rest,
        PatternLabel::PublisherSubscriber,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PatternLabel::Broker => "broker",
            PatternLabel::Layered => "layered",
            PatternLabel::EventBus => "event-bus",
            PatternLabel::PipeAndFilter => "pipe-and-filter",
            PatternLabel::Repository => "repository",
            PatternLabel::Microkernel => "microkernel",
            PatternLabel::Microservices => "microservices",
            PatternLabel::ModelViewController => "model-view-controller",
            PatternLabel::PeerToPeer => "peer-to-peer",
            PatternLabel::PresentationAbstractionController => {
                "presentation-abstraction-controller"
            }
            PatternLabel::ClientServer => "client-server",
            PatternLabel::SpaceBased => "space-based",
            PatternLabel::Rest => "rest",
            PatternLabel::PublisherSubscriber => "publisher-subscriber",
        }
    }

    pub fn ordinal(self) -> u8 {
        self as u8
    }

    pub fn from_ordinal(ordinal: u8) -> Option<Self> {
        Self::ALL.get(ordinal as usize).copied()
    }
}

impl fmt::Display for PatternLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PatternLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim();
        Self::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| UnknownLabel {
                given: s.to_string(),
            })
    }
}
