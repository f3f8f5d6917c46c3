from pydantic import BaseModel, ConfigDict, Field, model_validator


class ModelSpec(BaseModel):
    """Architecture constants of the target model and its draft model.

    Field aliases are the keys of the model config file.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    hidden_dim: int = Field(alias="h", ge=1)
    kv_dim: int = Field(alias="h_kv", ge=1)
    mlp_dim: int = Field(alias="h_mlp", ge=1)
    target_layers: int = Field(alias="l", ge=1)
    vocab: int = Field(alias="V", ge=1)
    draft_layers: int = Field(alias="L_d", ge=1)
    draft_steps: int = Field(alias="D", ge=1)
    # Not consumed by any workload formula.
    num_heads: int = Field(alias="n_h", ge=1)

    @model_validator(mode="after")
    def _check_dims(self) -> "ModelSpec":
        if self.kv_dim > self.hidden_dim:
            raise ValueError("h_kv must not exceed h")
        if self.hidden_dim % self.num_heads != 0:
            raise ValueError("h must be divisible by n_h")
        return self


class HardwareSpec(BaseModel):
    """Roofline constants of one accelerator."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    peak_flops: float = Field(alias="P_peak", gt=0)
    mem_bandwidth: float = Field(alias="B_mem", gt=0)
    dtype_bytes: int = Field(default=2, gt=0)


class DeployConfig(BaseModel):
    """Deployment point: batch, cached context and tree sizes."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    batch: int = Field(alias="b", ge=1)
    prefill_len: int = Field(alias="s_pre", ge=0)
    # 0 is the degenerate tree: verification of the root token only.
    topk_paths: int = Field(alias="top_k", ge=0)
    draft_tokens: int = Field(alias="k", ge=1)
    accepted_tokens: float = Field(alias="t_acc", gt=0)
