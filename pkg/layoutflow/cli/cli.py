import json
import sys
from pathlib import Path

import click

from ..errors import InvalidConfig, LayoutflowError, exit_code_for
from ..flowmatch import ClassVocab, load_checkpoint, sample, sample_batch, save_checkpoint, train as train_model
from ..harness import ExperimentConfig, build_layouts, evaluate_scenes, plot_sweep, run_benchmark, run_match
from ..loaders import parse_cli
from ..metrics import write_summary_json
from ..prompt import (
    layout_to_prompt,
    load_layout,
    parse_prompt,
    prompt_to_layout,
    serialize_prompt,
    strip_coordinates,
    validate,
)
from ..scenes import read_scene_archive, render, write_scene_archive
from ..utils.logging import LOGGER, JsonlLogger, set_verbosity
from ..utils.seeding import STAGE_DATASET, STAGE_HELDOUT
from ..utils.smart_defaults import infer_output_path

DEFAULT_CONFIG = "sweep_desk"

config_option = click.option(
    "--config", "-c", type=str, default=DEFAULT_CONFIG, show_default=True, help="Config name or path"
)
set_option = click.option(
    "--set", "-s", "overrides", multiple=True, help="Config override, e.g. --set train.epochs=2 (repeatable)"
)


def _experiment(config, overrides, **extra) -> ExperimentConfig:
    updates = parse_cli(list(overrides))
    updates.update({k: v for k, v in extra.items() if v is not None})
    return ExperimentConfig.from_file(config, updates)


@click.group()
@click.option("--quiet", "-q", is_flag=True, default=False, help="Only log errors")
def cli(quiet):
    """Layout-grounded generation toolkit: prompts, guidance, toy flow matching and layout metrics"""
    set_verbosity(not quiet)


@cli.command()
@config_option
@set_option
@click.option("--output", "-o", type=str, default=None, help="Output directory path")
def train(config, overrides, output):
    """Train the toy flow-matching model on a synthetic scene corpus"""
    cfg = _experiment(config, overrides)
    out = infer_output_path(output or cfg.output_dir)

    specs = build_layouts(cfg.seed, cfg.n_train, cfg.layout_config, cfg.palette, STAGE_DATASET)
    dataset = [(spec.to_prompt(), render(spec)) for spec in specs]
    logger = JsonlLogger(out)
    try:
        logger.log_hyperparams(cfg.to_dict())
        result = train_model(cfg.train_config, dataset, ClassVocab(cfg.palette.names), logger)
    finally:
        logger.close()
    save_checkpoint(result.model, result.vocab, out / "model.pt")


@cli.command(name="sample")
@config_option
@set_option
@click.option("--model", "-m", type=str, required=True, help="Checkpoint written by 'train'")
@click.option("--prompt", "-p", type=str, default=None, help="Layout prompt with <bbox> tags")
@click.option("--layout", "-l", type=str, default=None, help="Layout JSON file")
@click.option("--heldout", "-n", type=int, default=None, help="Sample this many held-out layouts into an archive")
@click.option("--s-coord", type=float, default=None, help="Coordinate guidance scale")
@click.option("--no-coords", is_flag=True, default=False, help="Strip coordinates (text-only baseline)")
@click.option("--index", type=int, default=0, help="Noise index of a single sample")
@click.option("--output", "-o", type=str, default=None, help="Output image (single prompt) or archive directory")
def sample_cmd(config, overrides, model, prompt, layout, heldout, s_coord, no_coords, index, output):
    """Sample scenes from a trained model with coordinate guidance"""
    if sum(x is not None for x in (prompt, layout, heldout)) != 1:
        raise click.UsageError("give exactly one of --prompt, --layout or --heldout")
    cfg = _experiment(config, overrides)
    net, vocab = load_checkpoint(model)
    sampler = cfg.sampler_for(None if no_coords else (s_coord if s_coord is not None else cfg.guidance.scales.s_coord))

    if heldout is not None:
        specs = build_layouts(cfg.seed, heldout, cfg.layout_config, cfg.palette, STAGE_HELDOUT)
        prompts = [spec.to_prompt() for spec in specs]
        if no_coords:
            prompts = [parse_prompt(strip_coordinates(p)) for p in prompts]
        scenes = sample_batch(net, prompts, sampler, vocab)
        write_scene_archive(infer_output_path(output or cfg.output_dir), zip(specs, scenes))
        return

    p = parse_prompt(prompt) if prompt is not None else layout_to_prompt(load_layout(layout))
    if no_coords:
        p = parse_prompt(strip_coordinates(p))
    scene = sample(net, p, sampler, vocab, index=index)
    path = Path(output or "sample.png")
    path.parent.mkdir(parents=True, exist_ok=True)
    scene.to_image().save(path)
    LOGGER.info(f"Saved sample to {path}")


@cli.command()
@config_option
@set_option
@click.option("--archive", "-a", type=str, required=True, help="Scene archive written by 'sample --heldout'")
@click.option("--output", "-o", type=str, default=None, help="Summary JSON path")
def eval(config, overrides, archive, output):
    """Detect and score an archive of generated scenes against its layouts"""
    cfg = _experiment(config, overrides)
    items = read_scene_archive(archive)
    if not items:
        raise InvalidConfig("archive", f"{archive} holds no scenes")
    specs, scenes = zip(*items)
    summary = evaluate_scenes(specs, scenes, cfg)
    LOGGER.info(
        f"mIoU {summary.miou:.4f}  AP {summary.ap:.4f}  AP50 {summary.ap50:.4f}  AP75 {summary.ap75:.4f}  "
        f"instance SR {summary.instance_sr['avg']:.4f}  image SR {summary.image_sr['avg']:.4f}"
    )
    if output:
        write_summary_json(summary, output)
    else:
        click.echo(json.dumps(summary.to_dict(), indent=2, sort_keys=True))


@cli.command()
@config_option
@set_option
@click.option("--output", "-o", type=str, default=None, help="Output directory path")
@click.option("--plot/--no-plot", default=True, help="Render sweep.png from sweep.csv")
def sweep(config, overrides, output, plot):
    """Train, then sweep the coordinate guidance scale over held-out layouts"""
    cfg = _experiment(config, overrides)
    out = infer_output_path(output or cfg.output_dir)
    run_benchmark(cfg, out)
    if plot:
        plot_sweep(out / "sweep.csv", out / "sweep.png")


@cli.command()
@click.option("--config", "-c", type=str, default="match", show_default=True, help="Config name or path")
@set_option
@click.option("--manifest", "-m", type=str, required=True, help="Scene manifest JSON")
@click.option("--output", "-o", type=str, default="verdicts.json", show_default=True, help="Verdict file")
def match(config, overrides, manifest, output):
    """Assign subjects to candidate boxes and accept or reject every scene of a manifest"""
    cfg = _experiment(config, overrides)
    result = run_match(
        manifest,
        cfg.match_weights,
        cfg.match_thresholds,
        output=output,
        normalize=cfg.match_normalize,
        filter_cfg=cfg.match_filter,
    )
    for code, n in result["summary"]["by_reason"].items():
        LOGGER.info(f"  {code}: {n}")


@cli.group()
def prompt():
    """Prompt grammar utilities"""
    pass


@prompt.command()
@click.argument("text")
def parse(text):
    """Parse a prompt and print its layout JSON and any violations"""
    p = parse_prompt(text)
    body = prompt_to_layout(p).to_dict()
    body["violations"] = [str(v) for v in validate(p)]
    click.echo(json.dumps(body, indent=2))


@prompt.command(name="format")
@click.argument("layout", type=click.Path(exists=True, dir_okay=False))
def format_cmd(layout):
    """Serialize a layout JSON file into its canonical prompt"""
    click.echo(serialize_prompt(layout_to_prompt(load_layout(layout))))


@prompt.command()
@click.argument("text")
def strip(text):
    """Drop every <bbox> tag from a prompt"""
    click.echo(strip_coordinates(parse_prompt(text)))


def main():
    try:
        cli()
    except LayoutflowError as e:
        LOGGER.error(str(e))
        sys.exit(exit_code_for(e))


if __name__ == "__main__":
    main()
