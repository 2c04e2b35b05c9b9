from setuptools import setup, find_packages

with open("README.md", "w") as f:
    f.write("""# Graphene FAAE

Forward-secure aggregate authenticated encryption for constrained senders.
Each message is sealed under its own evolving key, and the verifier checks
a whole window of n messages against one aggregate tag before decrypting
anything. Per-index key material can be precomputed offline so the online
cost per message is one XOR plus one cheap MAC.

## Features

- Three instantiations: Std FAAE (AES-CBC + HMAC-SHA-256), Graphene-AE
  (AES-GCM, tag-compatible per message) and Graphene-Poly (AES-CTR + Poly1305)
- Hash-chain key evolution with zeroization of every replaced key
- Offline-online tables, one per window, consumed exactly once
- Hash, XOR and modular-addition tag aggregation
- Canonical binary wire format with a strict decoder
- Benchmark matrix and a key-compromise (breach) simulation

## Installation

```bash
pip install -r requirements.txt
python setup.py install
```

## Usage

```bash
graphene keygen --inst poly --n 1024 --max-len 16
graphene pipeline --in messages.txt
graphene bench --grid 16,256:1024:std,ae,poly --reps 100 --csv bench.csv
GRAPHENE_ALLOW_SNAPSHOT=1 graphene breach --j 13 --n 8
```

or `python -m graphene_faae ...`.

## Requirements

- Python 3.9+
- cryptography
- cffi
- appdirs
""")

setup(
    name="graphene_faae",
    version="0.1.0",
    description="Forward-secure aggregate offline-online authenticated encryption",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    author="Graphene FAAE Team",
    packages=find_packages(exclude=["tests"]),
    install_requires=[
        "cryptography>=41.0.0",
        "cffi>=1.15.0",
        "appdirs>=1.4.4",
    ],
    extras_require={
        "test": ["hypothesis>=6.80.0"],
    },
    python_requires=">=3.9",
    entry_points={
        "console_scripts": [
            "graphene=graphene_faae.__main__:main",
        ],
    },
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Developers",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Security :: Cryptography",
    ],
)
