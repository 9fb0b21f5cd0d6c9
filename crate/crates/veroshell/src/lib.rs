//! Certified shelling orders for intervals in (pinched) Veronese posets.
//!
//! The library builds finite graded posets from lattice-vector data,
//! produces shelling orders of their maximal chain sets through three
//! composable construction steps, and verifies every claim it emits:
//! shelling certificates, atom-ordering side conditions, and the
//! homological consequences at desk scale.

pub mod poset;
pub mod shelling;
pub mod topology;
pub mod veronese;
