//! Which subcommands exercise which library operations.

pub const OPERATIONS: &[(&str, &[&str])] = &[
    (
        "run",
        &[
            "defect",
            "ladder",
            "compress",
            "maximal",
            "sobolev",
            "concentrate",
            "stability",
            "catalog",
            "bracket",
            "trajectory",
        ],
    ),
    ("eval_field", &["bracket", "concentrate"]),
    ("jacobian", &["bracket"]),
    ("lie_bracket", &["bracket"]),
    ("divergence", &["bracket"]),
    ("builtin_catalog", &["catalog"]),
    (
        "load_document",
        &[
            "catalog",
            "defect",
            "ladder",
            "compress",
            "concentrate",
            "stability",
            "bracket",
            "trajectory",
        ],
    ),
    ("flow_map", &["trajectory", "defect", "compress"]),
    (
        "integrate_trajectory",
        &["trajectory", "concentrate", "stability"],
    ),
    ("analytic_flow_helix", &["defect", "trajectory", "compress"]),
    ("analytic_flow_graph_foliation", &["defect"]),
    ("escape_time_bound", &["trajectory"]),
    ("sup_norm_on_ball", &["trajectory"]),
    ("chain_rule_residual", &["trajectory"]),
    (
        "sample_reference_measure",
        &[
            "defect",
            "ladder",
            "compress",
            "concentrate",
            "stability",
            "bracket",
        ],
    ),
    ("pushforward_density", &["compress"]),
    ("compressibility_estimate", &["compress"]),
    ("maximal_function", &["maximal"]),
    ("sharp_maximal_function", &["maximal"]),
    ("sharp_maximal_decay", &["maximal"]),
    ("sample_pairs", &["sobolev"]),
    ("sobolev_pointwise_audit", &["sobolev"]),
    ("commutator_defect", &["defect"]),
    ("defect_statistics", &["defect"]),
    ("residual_a", &["ladder"]),
    ("residual_b", &["ladder"]),
    ("residual_r", &["ladder"]),
    ("residual_r_integrated", &["ladder"]),
    ("scaling_exponent", &["ladder", "concentrate"]),
    ("concentration_residual", &["concentrate"]),
    ("omega_variation", &["concentrate"]),
    ("phi_delta", &["stability"]),
    ("perturbed_field", &["stability"]),
    ("stability_bound_audit", &["stability"]),
];

/// Operations reachable from a subcommand.
pub fn operations_of(subcommand: &str) -> Vec<&'static str> {
    OPERATIONS
        .iter()
        .filter(|(_, subs)| subs.contains(&subcommand))
        .map(|(op, _)| *op)
        .collect()
}
