"""Loading and dumping of the flat ``key = value`` config files."""

import logging
from pathlib import Path
from typing import Type, TypeVar, Union

from pydantic import BaseModel, ValidationError

from app.core.exceptions import ConfigFileNotFoundError, ConfigParseError, ConfigValidationError
from app.core.models import DeployConfig, HardwareSpec, ModelSpec
from app.utils.utils import format_number, parse_kv_text

logger = logging.getLogger(__name__)

ConfigT = TypeVar("ConfigT", bound=BaseModel)


def _file_keys(model_cls: Type[BaseModel]) -> list:
    return [info.alias or name for name, info in model_cls.model_fields.items()]


def parse_config(text: str, model_cls: Type[ConfigT], source: str = "<string>") -> ConfigT:
    """
    Validate a config text against one of the config models.

    Args:
        text (str): File contents
        model_cls: ModelSpec, HardwareSpec or DeployConfig
        source (str): Name used in error messages

    Returns:
        The validated, immutable config

    Raises:
        ConfigParseError: On malformed lines or unknown keys
        ConfigValidationError: On a missing key or a violated invariant; ``field`` names the key
    """
    values = parse_kv_text(text, source)
    known = _file_keys(model_cls)
    unknown = [key for key in values if key not in known]
    if unknown:
        raise ConfigParseError(f"{source}: unknown key(s) {', '.join(unknown)}; expected {', '.join(known)}")

    try:
        return model_cls.model_validate(values)
    except ValidationError as e:
        first = e.errors()[0]
        field = str(first["loc"][0]) if first["loc"] else None
        where = f" '{field}'" if field else ""
        raise ConfigValidationError(f"{source}: invalid{where}: {first['msg']}", field=field) from e


def _load(path: Union[str, Path], model_cls: Type[ConfigT]) -> ConfigT:
    path = Path(path)
    if not path.is_file():
        raise ConfigFileNotFoundError(str(path))
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigParseError(f"{path}: cannot read file: {e}") from e
    config = parse_config(text, model_cls, source=str(path))
    logger.debug("Loaded %s from %s", model_cls.__name__, path)
    return config


def load_model_spec(path: Union[str, Path]) -> ModelSpec:
    """Load and validate a model config (keys ``h, h_kv, h_mlp, l, V, L_d, D, n_h``)."""
    return _load(path, ModelSpec)


def load_hardware_spec(path: Union[str, Path]) -> HardwareSpec:
    """Load and validate a hardware config (keys ``P_peak, B_mem, dtype_bytes``)."""
    return _load(path, HardwareSpec)


def load_deploy_config(path: Union[str, Path]) -> DeployConfig:
    """Load and validate a deployment config (keys ``b, s_pre, top_k, k, t_acc``)."""
    return _load(path, DeployConfig)


def dump_config(config: BaseModel) -> str:
    """Serialize a config in the file format; ``parse_config`` reads it back unchanged."""
    data = config.model_dump(by_alias=True)
    return "".join(f"{key} = {format_number(value)}\n" for key, value in data.items())
