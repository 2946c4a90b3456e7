from config.base_config import EncoderConfig
from config.enums import EncoderKind
from lib.autodiff import Tensor

from .dan import encode_dan
from .params import EncoderParams, expected_shapes, init_encoder_params
from .transformer import SequenceInput, encode_transformer, multi_head_attention


def encode(params: EncoderParams, config: EncoderConfig, seq: SequenceInput) -> Tensor:
    """Pooled representation from whichever encoder the config names."""
    if config.kind == EncoderKind.DAN:
        return encode_dan(params, config, seq)
    _, pooled = encode_transformer(params, config, seq)
    return pooled


__all__ = [
    "EncoderParams",
    "encode",
    "encode_dan",
    "encode_transformer",
    "expected_shapes",
    "init_encoder_params",
    "multi_head_attention",
]
