//! Session service for the depthtouch engine.
//!
//! Each session owns one [`depthtouch_core::Engine`] ticking at 1 kHz on its
//! own thread. Clients steer it over a WebSocket with `set_hip`, `set_roi`
//! and `set_level` messages and receive state snapshots at 60 Hz. Plain HTTP
//! serves the asset list and each pyramid level as an `.mhdf` grid.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/assets` | asset ids and level sizes |
//! | GET | `/assets/{id}/levels/{l}/grid` | level `l` as `.mhdf` |
//! | POST | `/sessions` | `{"asset": id, "params"?: {...}, "roi"?: {...}}` |
//! | GET | `/sessions/{id}` | latest snapshot |
//! | DELETE | `/sessions/{id}` | stop the session |
//! | GET | `/sessions/{id}/ws` | WebSocket stream |

pub mod api;
pub mod assets;
pub mod protocol;
pub mod session;

pub use api::{router, AppState};
pub use assets::{Asset, AssetStore};
pub use protocol::{ClientMsg, ErrorCode, ServerMsg, Snapshot, TickStats};
pub use session::{Command, CommandError, Session, SessionConfig};
