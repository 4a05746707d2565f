"""
Setup script for fourier-shap
"""
from setuptools import setup

setup(
    name="fourier-shap",
    version="0.1.0",
    description="Exact interventional SHAP values from sparse Walsh-Hadamard spectra",
    author="fourier-shap developers",
    python_requires=">=3.9",
    py_modules=["errors", "fourier_core", "tree_fourier", "shap_engine", "oracles",
                "blackbox_approx", "data_io", "main"],
    install_requires=[
        "numpy>=1.21.0",
        "scipy>=1.7.0",
        "pandas>=1.3.0",
    ],
    extras_require={
        "dev": ["pytest>=7.0", "hypothesis>=6.0"],
    },
    entry_points={
        "console_scripts": [
            "fourier-shap=main:main",
        ],
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
)
