"""CXL JBOF simulator with inter-SSD compute-resource sharing."""

try:
    from ._xbofsim import (  # noqa: F401
        ShardsEstimator,
        bom_cost,
        decode_descriptor,
        encode_descriptor,
        preset_json,
        preset_names,
        redirect_ratio,
        run_scenario,
        __version__,
    )
except ImportError:  # in-tree builds put the module on sys.path directly
    from _xbofsim import (  # noqa: F401
    ShardsEstimator,
    bom_cost,
    decode_descriptor,
    encode_descriptor,
    preset_json,
    preset_names,
    redirect_ratio,
    run_scenario,
    __version__,
)
