from .catalog import (  # noqa: F401
    BASE_FEATURES,
    FeatureCatalog,
    default_catalog,
    extract_all_iqms,
)
