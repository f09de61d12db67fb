"""3D Gaussian splatting renderer: wait-free radix sort, preprocess culling,
instanced-quad rasterization and a double-precision CPU reference."""

from ._core import (
    Camera,
    Device,
    Renderer,
    Scene,
    SplatError,
    depth_key,
    exclusive_scan,
    float_to_half,
    generate_keys,
    half_to_float,
    median,
    pack_rgba8,
    percentile_nearest_rank,
    plan_memory,
    psnr,
    radix_sort,
    read_ply,
    render_reference,
    run_cli,
    stable_sort_oracle,
    stddev_population,
    survivors,
    synth_scene,
    write_ply,
)

__all__ = [
    "Camera",
    "Device",
    "Renderer",
    "Scene",
    "SplatError",
    "depth_key",
    "exclusive_scan",
    "float_to_half",
    "generate_keys",
    "half_to_float",
    "median",
    "pack_rgba8",
    "percentile_nearest_rank",
    "plan_memory",
    "psnr",
    "radix_sort",
    "read_ply",
    "render_reference",
    "run_cli",
    "stable_sort_oracle",
    "stddev_population",
    "survivors",
    "synth_scene",
    "write_ply",
]
