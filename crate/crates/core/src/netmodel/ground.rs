use super::{LoadConnection, Network, WindingConnection};

/// Whether the network offers any galvanic return path to ground. Gates the
/// generation of ground-referenced fault types.
///
/// A grounded source, any grounded-wye transformer winding, or any
/// wye-connected load counts as a ground path.
pub fn ground_path_exists(net: &Network) -> bool {
    net.source.grounded
        || net
            .transformers
            .iter()
            .flat_map(|t| t.windings.iter())
            .any(|w| w.connection == WindingConnection::WyeGrounded)
        || net.loads.iter().any(|l| l.connection == LoadConnection::Wye)
}
