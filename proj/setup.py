"""CMake-driven build of the pybind11 extension, packaged with setuptools.

`pip install .` configures the CMake project with the python module enabled,
builds the `_core` extension, and drops it into the `shear` package.
"""

import os
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name: str):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext: CMakeExtension) -> None:
        out_dir = Path(self.get_ext_fullpath(ext.name)).resolve().parent
        build_dir = Path(self.build_temp).resolve() / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)

        cfg = "Debug" if self.debug else "Release"
        cmake_args = [
            f"-DCMAKE_BUILD_TYPE={cfg}",
            f"-DPython3_EXECUTABLE={sys.executable}",
            "-DSHEAR_BUILD_PYTHON=ON",
            "-DSHEAR_BUILD_TESTS=OFF",
            "-DSHEAR_BUILD_TOOLS=OFF",
        ]
        source_dir = Path(__file__).resolve().parent
        subprocess.run(["cmake", str(source_dir), *cmake_args], cwd=build_dir, check=True)
        subprocess.run(
            ["cmake", "--build", ".", "--target", "shear_python",
             f"-j{os.cpu_count() or 2}"],
            cwd=build_dir,
            check=True,
        )

        # The CMake build stages the module under python/shear/ in its build
        # tree; copy it next to the package sources in the wheel.
        staged = build_dir / "python" / "shear"
        out_dir.mkdir(parents=True, exist_ok=True)
        for so in staged.glob("_core*.so"):
            self.copy_file(str(so), str(out_dir / so.name))


setup(
    ext_modules=[CMakeExtension("shear._core")],
    cmdclass={"build_ext": CMakeBuild},
)
