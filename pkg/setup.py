#!/usr/bin/env python3
"""
Setup script for the Landau equation solver and verifier.
"""
from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="landau-lab",
    version="1.0.0",
    author="Landau Lab Project",
    description="Solves the spatially inhomogeneous Landau equation with soft potentials and checks its "
                "qualitative properties",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(include=["landau_base", "landau_base.*"]),
    py_modules=["run_landau"],
    classifiers=[
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.21.0,<2.0.0",
        "scipy>=1.12.0",
    ],
    extras_require={
        "dev": [
            "pytest>=7.0.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "landau-lab=run_landau:main",
        ],
    },
    include_package_data=True,
    package_data={
        "": ["*.json"],
    },
)
