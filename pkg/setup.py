from setuptools import setup, find_packages

setup(
    name="fractal_poincare",
    version="0.1.0",
    description="嵌套分形上的 Dirichlet 型、热核与 Poincaré 类不等式的数值验证",
    packages=find_packages(exclude=["examples", "examples.*"]),
    python_requires=">=3.10",
    install_requires=[
        "pytest",
        "pytest-xdist",
        "pytest-repeat",
        "pydantic>=2",
        "numpy>=1.24.4",
        "scipy>=1.10",
        "pandas",
        "jsonschema",
        "rich",
        "tqdm",
    ],
    entry_points={
        "console_scripts": [
            "fractal-lab=src.main:main",
        ],
    },
)
