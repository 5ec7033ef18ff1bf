#!/usr/bin/env python3

from setuptools import setup

setup(
    name = 'ringlaw',
    description = 'Free convolution, single ring law and local law experiments',
    classifiers = [
        # keep private until the experiments are published
        'Private :: Do not upload',
    ],
)
