//! Linear chain layout: two end nodes, `r` equally spaced repeaters between
//! them, a Bell-state-measurement station at the midpoint of every elementary
//! link, and a coordinating node ("C-node") in the middle of the chain.

use thiserror::Error;

/// A linear repeater chain.
///
/// Nodes are indexed `0..=num_repeaters + 1` from left to right (`0` and
/// `num_repeaters + 1` are the end nodes).  Elementary link `i` connects
/// nodes `i` and `i + 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainTopology {
    pub total_length_km: f64,
    pub num_repeaters: u32,
    /// Node that coordinates rounds and swap scheduling: `floor((r + 1) / 2)`,
    /// the middle of the chain (an end node only when `r = 0`).
    pub c_node_index: u32,
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("total_length_km must be finite and > 0, got {0}")]
    Length(f64),
}

impl ChainTopology {
    pub fn new(total_length_km: f64, num_repeaters: u32) -> Result<ChainTopology, TopologyError> {
        if !total_length_km.is_finite() || total_length_km <= 0.0 {
            return Err(TopologyError::Length(total_length_km));
        }
        Ok(ChainTopology {
            total_length_km,
            num_repeaters,
            c_node_index: num_repeaters.div_ceil(2),
        })
    }

    /// Number of elementary links, `r + 1`.
    #[inline]
    pub fn num_links(&self) -> u32 {
        self.num_repeaters + 1
    }

    /// Number of nodes including both end nodes, `r + 2`.
    #[inline]
    pub fn num_nodes(&self) -> u32 {
        self.num_repeaters + 2
    }

    /// Length of one elementary link, `L / (r + 1)`.
    #[inline]
    pub fn link_length_km(&self) -> f64 {
        self.total_length_km / self.num_links() as f64
    }

    #[inline]
    pub fn node_position_km(&self, node: u32) -> f64 {
        node as f64 * self.link_length_km()
    }

    /// Position of the measurement station of link `i` (its midpoint).
    #[inline]
    pub fn bsm_position_km(&self, link: u32) -> f64 {
        (link as f64 + 0.5) * self.link_length_km()
    }

    /// Hop count between a node and the C-node.
    #[inline]
    pub fn hops_to_c_node(&self, node: u32) -> u32 {
        node.abs_diff(self.c_node_index)
    }

    /// Hop count from the C-node to the farthest node; broadcasts from the
    /// C-node are heard everywhere after this many link flight times.
    pub fn max_hops_from_c_node(&self) -> u32 {
        (0..self.num_nodes())
            .map(|n| self.hops_to_c_node(n))
            .max()
            .unwrap()
    }

    /// Hop count from link `i`'s completion-reporting node (the one nearer
    /// the C-node) to the C-node.
    #[inline]
    pub fn link_report_hops(&self, link: u32) -> u32 {
        self.hops_to_c_node(link).min(self.hops_to_c_node(link + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_links_of_25_km() {
        let t = ChainTopology::new(100.0, 3).unwrap();
        assert_eq!(t.num_links(), 4);
        assert_eq!(t.num_nodes(), 5);
        assert_eq!(t.link_length_km(), 25.0);
        assert_eq!(t.c_node_index, 2);
        assert_eq!(t.bsm_position_km(0), 12.5);
        assert_eq!(t.node_position_km(4), 100.0);
    }

    #[test]
    fn no_repeater_chain_coordinates_from_an_end() {
        let t = ChainTopology::new(50.0, 0).unwrap();
        assert_eq!(t.c_node_index, 0);
        assert_eq!(t.num_links(), 1);
        assert_eq!(t.max_hops_from_c_node(), 1);
        assert_eq!(t.link_report_hops(0), 0);
    }

    #[test]
    fn uneven_chain_lengths_divide_evenly_in_floats() {
        let t = ChainTopology::new(100.0, 2).unwrap();
        assert!((t.link_length_km() - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(t.c_node_index, 1);
        // Farthest node from node 1 is node 3, two hops away.
        assert_eq!(t.max_hops_from_c_node(), 2);
    }

    #[test]
    fn rejects_nonpositive_length() {
        assert!(ChainTopology::new(0.0, 1).is_err());
        assert!(ChainTopology::new(-5.0, 1).is_err());
        assert!(ChainTopology::new(f64::NAN, 1).is_err());
    }
}
