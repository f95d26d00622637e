"""
Setup script for the Referendum Ledger simulator.
"""

from setuptools import setup, find_packages

setup(
    name="referendum-ledger",
    version="1.0.0",
    author="Referendum Ledger Team",
    description="Referendum Ledger - secret-shared referendum protocol over an append-only ledger, with scenario runner and verifier",
    packages=find_packages(include=['core', 'modules', 'utils']),
    py_modules=['main'],
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Security :: Cryptography",
        "Topic :: Scientific/Engineering",
    ],
    python_requires=">=3.11",
    install_requires=[
        "numpy>=1.24.0",
        "galois>=0.3.8",
        "cryptography>=41.0.0",
        "psutil>=5.9.0",
    ],
    extras_require={
        "dev": [
            "pytest>=7.0.0",
            "scipy>=1.10.0",
            "black>=23.0.0",
            "flake8>=6.0.0",
            "mypy>=1.0.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "referendum-sim=main:main",
        ],
    },
    include_package_data=True,
    zip_safe=False,
)
