from setuptools import find_packages, setup

from socheck import __version__

setup(
    name="socheck",
    version=__version__,
    description="Second-order optimality verifier for multiobjective C^{1,1} programs",
    packages=find_packages(include=["socheck", "socheck.*"]),
    python_requires=">=3.10",
    install_requires=["numpy>=1.24"],
    extras_require={"test": ["pytest>=7.0"]},
    entry_points={"console_scripts": ["socheck = socheck.__main__:main"]},
)
