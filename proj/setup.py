from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

sources = [
    "src/cost.cpp",
    "src/geo.cpp",
    "src/prefix_index.cpp",
    "src/policy.cpp",
    "src/telemetry.cpp",
    "src/report.cpp",
    "src/workload.cpp",
    "src/config.cpp",
    "src/sim.cpp",
    "bindings/module.cpp",
]

setup(
    ext_modules=[
        Pybind11Extension(
            "gorgo._gorgo",
            sources,
            include_dirs=["include", "vendor"],
            cxx_std=20,
        )
    ],
    cmdclass={"build_ext": build_ext},
)
