from setuptools import setup, find_packages

setup(
    name="wavepp",
    version="0.1.0",
    packages=find_packages(exclude=("tests",)),
    python_requires=">=3.10",
    install_requires=[
        "numpy>=1.26.0",
        "scipy>=1.11.0",
        "modepy>=2023.1",
        "pydantic>=2.5.0",
        "pydantic-settings>=2.1.0",
        "pyyaml>=6.0.1",
        "structlog>=24.1.0",
        "prometheus-client>=0.19.0",
    ],
    entry_points={
        "console_scripts": [
            "wavepp=src.cli.main:main",
        ],
    },
)
