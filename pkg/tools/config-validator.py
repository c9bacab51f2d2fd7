#!/usr/bin/env python3
# SPDX-License-Identifier: GPL-2.0-or-later

import os
import sys
import json
import argparse
import jsonschema

ROOT_PATH = os.path.realpath(os.path.join(os.path.dirname(__file__), '..'))


def expression_check(config_json):
    # parse every descriptor string the way the CLI will
    if ROOT_PATH not in sys.path:
        sys.path.insert(0, ROOT_PATH)
    from magweyl.config import ExperimentConfig
    cfg = ExperimentConfig(config_json)
    cfg.field()
    if 'gauge' in config_json:
        cfg.potential()
    cfg.gauge_transform()
    for name in config_json.get('symbols', {}):
        cfg.expression(name)
    if 'bloch' in config_json:
        cfg.phi()


def action_validate(config_file, config_schema_file, expressions):
    config_json = json.load(config_file)
    schema_json = json.load(config_schema_file)

    jsonschema.validate(config_json, schema_json, cls=jsonschema.Draft202012Validator)
    if expressions:
        expression_check(config_json)


def main():
    parser = argparse.ArgumentParser(description="config-validator.py - Validate magweyl experiment configs")

    parser.add_argument("--json", "-j",
                        help="experiment config file path e.g. 'configs/product.json'",
                        type=argparse.FileType('r'),
                        required=True)

    parser.add_argument("--schema", "-s",
                        help="schema path e.g. 'magweyl/data/experiment-config-schema.json'",
                        type=argparse.FileType('r'),
                        default=os.path.join(ROOT_PATH, 'magweyl', 'data', 'experiment-config-schema.json'))

    parser.add_argument("--expressions", "-e",
                        help="also parse the expression strings (needs magweyl importable)",
                        action='store_true', default=False)

    args = parser.parse_args()

    try:
        action_validate(args.json, args.schema, args.expressions)
    except json.JSONDecodeError as err:
        print("Error. {}: line {} column {}: {}".format(args.json.name, err.lineno, err.colno, err.msg), file=sys.stderr)
        raise SystemExit(1)
    except jsonschema.exceptions.ValidationError as err:
        print(err, file=sys.stderr)
        raise SystemExit(1)
    except RuntimeError as err:
        print("Error. {}: {}".format(args.json.name, err), file=sys.stderr)
        raise SystemExit(1)


if __name__ == '__main__':
    main()
