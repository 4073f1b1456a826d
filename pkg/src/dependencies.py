from pathlib import Path

from src.config.settings import settings
from src.repositories.cache import SpectrumCache
from src.repositories.fields import FieldRepository
from src.services.enclosure import EnclosureService
from src.services.helmholtz import HelmholtzService
from src.services.lame import LameOperatorService
from src.services.norms import WeightedNormService
from src.services.pipeline import PipelineService
from src.services.potentials import PotentialService
from src.services.spectra import SpectraService
from src.services.verification import VerificationService


def get_field_repository():
    return FieldRepository()


def get_spectrum_cache():
    cache_dir = settings.runtime.LAME_SPECTRA_CACHE
    return SpectrumCache(Path(cache_dir)) if cache_dir else None


def get_norm_service():
    return WeightedNormService()


def get_helmholtz_service(norm_service=None):
    return HelmholtzService(norm_service or get_norm_service())


def get_lame_service():
    return LameOperatorService()


def get_enclosure_service():
    return EnclosureService()


def get_potential_service(field_repository=None):
    return PotentialService(field_repository or get_field_repository())


def get_spectra_service(lame_service=None, helmholtz_service=None, enclosure_service=None):
    return SpectraService(
        lame_service or get_lame_service(),
        helmholtz_service or get_helmholtz_service(),
        enclosure_service or get_enclosure_service(),
        cache=get_spectrum_cache(),
    )


def get_pipeline_service():
    field_repository = get_field_repository()
    norm_service = get_norm_service()
    lame_service = get_lame_service()
    enclosure_service = get_enclosure_service()
    helmholtz_service = get_helmholtz_service(norm_service)
    spectra_service = get_spectra_service(lame_service, helmholtz_service, enclosure_service)
    potential_service = get_potential_service(field_repository)
    verification_service = VerificationService(
        norm_service=norm_service,
        helmholtz_service=helmholtz_service,
        lame_service=lame_service,
        enclosure_service=enclosure_service,
        spectra_service=spectra_service,
        potential_service=potential_service,
    )
    return PipelineService(
        norm_service=norm_service,
        enclosure_service=enclosure_service,
        lame_service=lame_service,
        spectra_service=spectra_service,
        potential_service=potential_service,
        verification_service=verification_service,
        field_repository=field_repository,
    )
