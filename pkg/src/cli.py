"""Línea de comandos del motor PATH.

Subcomandos: pretrain, evaluate, ablate, verify y registry. Códigos de
salida: 0 éxito, 1 fallo en tiempo de ejecución, 2 error de uso o de
configuración.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import ValidationError

from src.config.settings import PATHS, SYSTEM, configure_logging, resolve_seed
from src.models.enums import Protocol, Scenario
from src.models.errors import ConfigError, PathEngineError
from src.models.experiment import ExperimentConfig
from src.models.validators import parse_pos_embed, parse_share_type

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _protocol(value: str) -> Protocol:
    try:
        protocol = Protocol.from_cli(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"protocolo inválido: '{value}' (full|head|partial)")
    if protocol is Protocol.PRETRAIN:
        raise argparse.ArgumentTypeError("pretrain no es un protocolo de evaluación")
    return protocol


def _share_type(value: str):
    share_type = parse_share_type(value)
    if share_type is None:
        raise argparse.ArgumentTypeError(f"tipo de compartición inválido: '{value}' (A|S|T)")
    return share_type


def _pos_embed(value: str) -> bool:
    shared = parse_pos_embed(value)
    if shared is None:
        raise argparse.ArgumentTypeError(f"valor inválido: '{value}' (shared|separate)")
    return shared


def build_parser() -> argparse.ArgumentParser:
    """Construye el parser con todos los subcomandos."""
    parser = argparse.ArgumentParser(prog="path-engine", description="Preentrenamiento multitarea jerárquico")
    parser.add_argument("--log-level", default=None, help="Nivel de logging (por defecto LOG_LEVEL)")
    commands = parser.add_subparsers(dest="command", required=True)

    pretrain = commands.add_parser("pretrain", help="Preentrena y guarda checkpoint y métricas")
    pretrain.add_argument("--config", default=PATHS["desk_config"], help="Documento JSON del experimento")
    pretrain.add_argument("--seed", type=int, default=None)
    pretrain.add_argument("--out", default=None, help="Directorio de salida")
    pretrain.add_argument("--workers", type=int, default=None, help="Contextos de ejecución concurrentes")

    evaluate = commands.add_parser("evaluate", help="Evalúa un checkpoint")
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--protocol", type=_protocol, required=True, help="full|head|partial")
    evaluate.add_argument("--scenario", type=Scenario, choices=list(Scenario), required=True,
                          help="in|out|unseen")
    evaluate.add_argument("--config", default=None, help="Experimento; por defecto el del checkpoint")
    evaluate.add_argument("--seed", type=int, default=None)
    evaluate.add_argument("--out", default=None, help="Archivo CSV del reporte")

    ablate = commands.add_parser("ablate", help="Compara variantes de compartición con semilla común")
    ablate.add_argument("--config", default=PATHS["desk_config"])
    ablate.add_argument("--share-type", type=_share_type, action="append", dest="share_types",
                        help="A|S|T; repetible (por defecto A, S y T)")
    ablate.add_argument("--pos-embed", type=_pos_embed, action="append", dest="pos_embeds",
                        help="shared|separate; repetible (por defecto ambos)")
    ablate.add_argument("--scenario", type=Scenario, choices=list(Scenario), default=Scenario.IN_DATASET)
    ablate.add_argument("--protocol", type=_protocol, default=Protocol.HEAD_FT)
    ablate.add_argument("--seed", type=int, default=None)
    ablate.add_argument("--out", default=None, help="Directorio base de las variantes")
    ablate.add_argument("--workers", type=int, default=None)

    verify = commands.add_parser("verify", help="Ejecuta las suites de propiedades")
    verify.add_argument("--suite", action="append", dest="suites", help="Suite a ejecutar; repetible")

    registry = commands.add_parser("registry", help="Tabla de auditoría del registro de compartición")
    registry.add_argument("--config", default=PATHS["desk_config"])
    registry.add_argument("--seed", type=int, default=None)
    return parser


def cmd_pretrain(args: argparse.Namespace) -> int:
    from src.graphs.pretrain_graph import run_pretrain

    config = ExperimentConfig.load(args.config)
    seed = resolve_seed(args.seed, config.plan.seed)
    result = run_pretrain(config, out_dir=args.out, seed=seed, max_workers=args.workers or SYSTEM["workers"])
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"métricas:   {result.metrics_path}")
    for dataset, loss in sorted(result.final_losses.items()):
        print(f"  {dataset:<20} pérdida final={loss:.6f}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    from src.services.evaluation_service import format_report, report_csv, run_evaluation

    config = ExperimentConfig.load(args.config) if args.config else None
    seed = resolve_seed(args.seed, default=None)
    report = run_evaluation(args.checkpoint, args.scenario, args.protocol, config=config, seed=seed)
    print(format_report(report))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(report_csv(report), encoding="utf-8")
        print(f"reporte: {args.out}")
    return EXIT_OK


def format_ablation(table) -> str:
    """Tabla de ablación: una fila por variante y una columna por métrica."""
    columns: List[str] = []
    for row in table.rows:
        columns.extend(key for key in row.metrics if key not in columns)
    header = ["share_type", "pos_embed"] + columns
    lines = [
        f"semilla={table.seed} escenario={table.scenario.value} protocolo={table.protocol.value}",
        " | ".join(header),
    ]
    for row in table.rows:
        cells = [row.share_type.value, "shared" if row.pos_embed_shared else "separate"]
        for key in columns:
            value = row.metrics.get(key)
            cells.append("n/a" if value is None else f"{value:.4f}")
        lines.append(" | ".join(cells))
    return "\n".join(lines)


def cmd_ablate(args: argparse.Namespace) -> int:
    from src.graphs.experiment_graph import run_ablation
    from src.models.enums import ShareType

    config = ExperimentConfig.load(args.config)
    seed = resolve_seed(args.seed, config.plan.seed)
    share_types = args.share_types or [ShareType.ALL, ShareType.SPECIFIC, ShareType.TASK]
    pos_embeds = args.pos_embeds or [True, False]
    variants = [(share_type, shared) for share_type in share_types for shared in pos_embeds]
    table = run_ablation(
        config, variants, seed, scenario=args.scenario, protocol=args.protocol,
        out_dir=args.out, max_workers=args.workers or SYSTEM["workers"],
    )
    print(format_ablation(table))
    if args.out:
        target = Path(args.out) / "ablation.json"
        target.write_text(json.dumps(table.model_dump(mode="json"), indent=2), encoding="utf-8")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    from src.services.verification import SUITES, run_suites

    unknown = sorted(set(args.suites or []) - set(SUITES))
    if unknown:
        raise ConfigError(f"suites desconocidas: {unknown}")
    report = run_suites(args.suites)
    for suite in report.suites:
        status = "OK  " if suite.passed else "FAIL"
        print(f"{status} {suite.name:<20} {suite.seconds:7.2f}s  {suite.detail}")
    failure = report.first_failure
    if failure is not None:
        print(f"primera propiedad fallida: {failure.name}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_registry(args: argparse.Namespace) -> int:
    from src.networks.path_model import PathModel
    from src.services.sharing_registry import registry_for

    config = ExperimentConfig.load(args.config)
    seed = resolve_seed(args.seed, config.plan.seed)
    registry = registry_for(config, PathModel.from_config(config, seed=seed))
    mask = registry.freeze_mask(config.plan.protocol, config.evaluation.partial_k)
    for row in registry.dump(mask):
        print(f"{row.name:<48} {row.scope:<28} {','.join(row.sync_set):<40} {row.trainable}")
    return EXIT_OK


COMMANDS = {
    "pretrain": cmd_pretrain,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "verify": cmd_verify,
    "registry": cmd_registry,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Punto de entrada; devuelve el código de salida."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    configure_logging(args.log_level)

    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValidationError, FileNotFoundError) as exc:
        print(f"error de configuración: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PathEngineError as exc:
        logger.error("fallo en '%s': %s", args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
