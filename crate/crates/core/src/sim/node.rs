//! Sensor-node wake-up state machine.

/// Sleep counter and awake flag of the node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeState {
    /// Frames remaining until the next wake-up.
    pub sigma: u32,
    /// Awake in the current frame.
    pub awake: bool,
    /// Wake-up interval last received from the beacon.
    pub tau: u32,
}

impl NodeState {
    /// A node that wakes in its first frame.
    pub fn new(tau: u32) -> Self {
        NodeState {
            sigma: 0,
            awake: false,
            tau: tau.max(1),
        }
    }
}

/// Advances the counter by one frame.
///
/// A sleeping node counts down. A node whose counter is zero wakes and
/// reloads the counter from the commanded interval, or from its previous
/// interval if the beacon was lost.
pub fn node_step(node: NodeState, beacon_received: bool, commanded_tau: u32) -> NodeState {
    if node.sigma > 0 {
        return NodeState {
            sigma: node.sigma - 1,
            awake: false,
            tau: node.tau,
        };
    }
    let tau = if beacon_received {
        commanded_tau.max(1)
    } else {
        node.tau
    };
    NodeState {
        sigma: tau - 1,
        awake: true,
        tau,
    }
}
