#!/bin/env python3
# -*- coding: utf-8 -*-
# helpers/influxdbclient.py
"""
Optional time-series sink for training loss and evaluation metrics.
Enabled only when a server url is configured and INFLUXDB_TOKEN is set.
"""

import logging
import os

import influxdb_client
from influxdb_client.client.write_api import SYNCHRONOUS


TOKEN_ENV = 'INFLUXDB_TOKEN'


class InfluxDBClient:
    def __init__(self, url, org, bucket, run_label):
        self._bucket = bucket
        self._org = org
        self._run_label = run_label

        client = influxdb_client.InfluxDBClient(
            url=url,
            token=os.environ[TOKEN_ENV],
            org=self._org
        )

        self._write_api = client.write_api(write_options=SYNCHRONOUS)
        logging.info(f'InfluxDBClient created. {url} bucket={bucket}')

    def write(self, point, fields, step):
        p = influxdb_client.Point(point).tag('run', self._run_label).field('step', int(step))
        for key, value in fields.items():
            p = p.field(key, float(value))
        try:
            self._write_api.write(bucket=self._bucket, org=self._org, record=p)
        except Exception as e:
            logging.error('Cannot write to InfluxDB server. %s' % e)


class NullSink:
    """Stand-in used when no InfluxDB server is configured."""
    def write(self, point, fields, step):
        pass


def make_sink(influx_config, run_label):
    if not influx_config.url or not os.environ.get(TOKEN_ENV):
        return NullSink()
    try:
        return InfluxDBClient(influx_config.url, influx_config.org, influx_config.bucket, run_label)
    except Exception as e:
        logging.error('Cannot connect to InfluxDB server. %s' % e)
        return NullSink()
