"""wicklab: a finite-mode laboratory for Gaussian analysis and quantization.

Layers, bottom to top:

- ``symtensor``   sparse symmetric tensors (chaos coefficient substrate)
- ``gaussian``    finite-dimensional Gaussian measures and their oracles
- ``diagrams``    pairing enumeration behind the moment formulas
- ``chaos``       Wick monomials, chaos expansions, Malliavin operators
- ``kahler``      compatible complex-structure block algebra
- ``quantize``    ladder operators, Weyl/Wick quantization, star products
- ``transforms``  the transform web between the four representations
- ``cosmo``       mode dynamics on expanding backgrounds
- ``cli``         command-line front end
"""

__version__ = "0.1.0"
