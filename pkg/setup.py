from setuptools import setup, find_packages

setup(
    name="mre_spring",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.12",
        "triangle>=20230923",
        "shapely>=2.0",
        "pandas>=2.0",
        "pydantic>=2.5,<3",
        "fastapi>=0.110",
        "uvicorn[standard]>=0.27",
    ],
    extras_require={
        "dev": [
            "pytest>=7.4",
            "httpx>=0.26",
        ],
    },
    entry_points={
        'console_scripts': [
            'mre-spring=mre_spring.cli:main',
        ],
    },
    include_package_data=True,
    package_data={
        'mre_spring': [
            'data/*.json',
        ],
    },
    python_requires=">=3.9",
    author="DSGM Team",
    description="Quasi-static magneto-mechanical simulator for MRE magnetic-spring grippers",
    long_description=open("README.md", encoding="utf-8").read(),
    long_description_content_type="text/markdown",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
)
