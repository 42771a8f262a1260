"""run ledger

Revision ID: 0001_initial
Revises:
Create Date: 2026-10-18 00:00:00.000000
"""

from alembic import op
import sqlalchemy as sa

# revision identifiers, used by Alembic.
revision = '0001_initial'
down_revision = None
branch_labels = None
depends_on = None


def upgrade():
    op.create_table(
        'scenario_runs',
        sa.Column('id', sa.Integer(), primary_key=True, nullable=False),
        sa.Column('scenario_hash', sa.String(length=16), nullable=True),
        sa.Column('command', sa.String(length=32), nullable=False),
        sa.Column('model', sa.String(length=32), nullable=True),
        sa.Column('n_sites', sa.Integer(), nullable=True),
        sa.Column('output_dir', sa.String(length=500), nullable=True),
        sa.Column('n_tables', sa.Integer(), nullable=False, server_default='0'),
        sa.Column('status', sa.String(length=16), nullable=False, server_default='ok'),
        sa.Column('created_at', sa.DateTime(timezone=True), server_default=sa.text('CURRENT_TIMESTAMP')),
    )
    op.create_index('ix_scenario_runs_id', 'scenario_runs', ['id'])
    op.create_index('ix_scenario_runs_scenario_hash', 'scenario_runs', ['scenario_hash'])

    op.create_table(
        'oracle_checks',
        sa.Column('id', sa.Integer(), primary_key=True, nullable=False),
        sa.Column('run_id', sa.Integer(), sa.ForeignKey('scenario_runs.id'), nullable=False),
        sa.Column('name', sa.String(length=100), nullable=False),
        sa.Column('max_abs_diff', sa.Float(), nullable=False),
        sa.Column('tolerance', sa.Float(), nullable=False),
        sa.Column('passed', sa.Boolean(), nullable=False),
        sa.Column('created_at', sa.DateTime(timezone=True), server_default=sa.text('CURRENT_TIMESTAMP')),
    )
    op.create_index('ix_oracle_checks_id', 'oracle_checks', ['id'])
    op.create_index('ix_oracle_checks_run_id', 'oracle_checks', ['run_id'])


def downgrade():
    op.drop_index('ix_oracle_checks_run_id', table_name='oracle_checks')
    op.drop_index('ix_oracle_checks_id', table_name='oracle_checks')
    op.drop_table('oracle_checks')
    op.drop_index('ix_scenario_runs_scenario_hash', table_name='scenario_runs')
    op.drop_index('ix_scenario_runs_id', table_name='scenario_runs')
    op.drop_table('scenario_runs')
