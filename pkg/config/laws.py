"""Empirical laws published with the draft-scaling study, kept as reference constants.

Each entry maps a name to (form, params, x label, y label). Forms are the values of
app.scaling.models.LawForm.
"""

REFERENCE_LAWS = {
    "pretrain-tokens": ("log10", (0.08, 5.05), "pretrain tokens (B)", "acceptance rate"),
    "draft-capacity": ("log10", (0.74, 4.61), "draft decoders", "acceptance rate"),
    "batch-throughput": ("log2", (286.79, 7.54), "batch size", "throughput (tokens/s)"),
    "optimal-topk": ("invsqrt", (27904.0, 0.034, -27897.0), "batch size", "optimal top_k"),
}
