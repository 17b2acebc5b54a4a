from setuptools import setup, find_packages  # Always prefer setuptools over distutils
from codecs import open  # To use a consistent encoding
from os import path

here = path.abspath(path.dirname(__file__))

# Get the long description from the relevant file
with open(path.join(here, 'README.rst'), encoding='utf-8') as f:
    readme = f.read()

setup(
    name='ocmt-forecast',

    # Version:
    version='0.1.0',

    description='Commandline tools for variable selection and forecasting with OCMT, Lasso and boosting '
                'under parameter instability',
    long_description=readme,

    # Choose your license
    license='BSD',

    # See https://pypi.python.org/pypi?%3Aaction=list_classifiers
    classifiers=[
        'Development Status :: 3 - Alpha',

        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Mathematics',

        # The license as you wish (should match "license" above)
        'License :: OSI Approved :: BSD License',

        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.9',
    ],

    keywords='variable selection forecasting OCMT lasso boosting down-weighting monte carlo',

    # Specify  packages via find_packages() and exclude the tests
    packages=find_packages(exclude=['src.test']),

    python_requires='>=3.9',

    # Entry points provide cross-platform support and allow
    # pip to create the appropriate form of executable for the target platform.
    # IMPORTANT: script names need to be in lower case ! ! ! (otherwise
    # deinstallation does not work)
    entry_points={
        'console_scripts': [
            'ocmt=src.cli:main',
            'variableselection=src.variableselection:main',
            'forecasting=src.forecasting:main',
            'simulation=src.simulation:main',
            'forecastevaluation=src.forecastevaluation:main',
        ],
    },

    # Run-time dependencies. (will be installed by pip)
    install_requires=['numpy>=1.20', 'scipy>=1.6', 'pandas>=1.3', 'statsmodels>=0.12'],

    extras_require={
        'test': ['pytest>=6'],
    },
)
