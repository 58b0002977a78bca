"""
Published clinical-scale results, copied into report metadata for
comparison. They are never used as pass/fail thresholds.
"""

REFERENCE_TARGETS: dict[str, dict[str, float | str]] = {
    'MRI-FLAIR': {
        'beta': 0.01,
        'psnr': 15.622,
        'fid': 88.299,
        'lpips': 0.227,
        'jsd': 0.0032,
        'kld': 0.0169,
        'dsc_mean': 0.724,
        'dsc_std': 0.01,
        'dsc_setting': '30 real subjects + 2000 synthetic pairs',
    },
    'PET': {
        'beta': 0.01,
        'psnr': 19.570,
        'fid': 54.008,
        'lpips': 0.309,
        'jsd': 0.0014,
        'kld': 0.0069,
        'dsc_mean': 0.594,
        'dsc_std': 0.0,
        'dsc_setting': '30 real subjects + 2000 synthetic pairs',
    },
}
